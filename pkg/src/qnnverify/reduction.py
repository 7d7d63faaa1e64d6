"""Reduction from quantified boolean formulas to network verification.

Each prefix variable becomes one gadget network over a 2**k-bit word (k =
number of universals), plus one network g that outputs the all-ones word on
every input. Fixing the order of valuations of the universal variables, word
bit r encodes the variables' values in valuation r:

* a universal variable with u earlier universals contributes bit (r >> u) & 1,
  so its gadget outputs the constant word with ones exactly where that bit is
  set (blocks of 2**u, alternating from zero at bit 0);
* an existential variable with u earlier universals may depend on exactly
  those, so its gadget tiles the low 2**u-bit block of its own input across
  the word (2**(k-u) copies), making bit r depend only on r mod 2**u.

The formula is then true iff some choice of existential inputs makes the
bit-wise evaluation of the matrix over the gadget outputs equal g's output.

All gadget layers use weights in {-1, 0, 1}, per-neuron shift 0, clamp width
2**k, and per-edge shifts; every intermediate value stays within
[0, 2**(2**k) - 1], so the clamp never fires and no rounding occurs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from . import bvterm as bt
from .bvterm import SmtScript
from .encoder import EncodeOptions, ALL_ON, Wire, encode_into, _resize
from .errors import EncodingError
from .intervals import full_input_box
from .model import FixedPointLayer, QuantizedNetwork, eval_network
from .qbf import EXISTS, FORALL, QbfFormula


def valuation_order(k: int) -> list[tuple[int, ...]]:
    """All valuations of k universal variables, earliest variable first.

    Valuation (y_1, ..., y_k) appears at rank sum(y_i * 2**(i-1)).
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    return [tuple((rank >> i) & 1 for i in range(k)) for rank in range(1 << k)]


def _layer(weights, bias, word_bits, edge_shift=None, direction="left") -> FixedPointLayer:
    n_out = len(weights)
    return FixedPointLayer(
        weights=weights,
        bias=bias,
        bit_shift=[0] * n_out,
        clamp_bits=[word_bits] * n_out,
        edge_shift=edge_shift,
        edge_shift_dir=direction,
    )


def _double_stage(shift: int, word_bits: int) -> list[FixedPointLayer]:
    """Two layers computing v + (v << shift) from a single value v."""
    return [
        _layer([[1], [1]], [0, 0], word_bits, edge_shift=[[0], [shift]], direction="left"),
        _layer([[1, 1]], [0], word_bits),
    ]


def _ones_layers(word_bits: int, k: int) -> list[FixedPointLayer]:
    """From any single input: the all-ones word (1, doubled k times)."""
    layers = [_layer([[0]], [1], word_bits)]
    for j in range(k):
        layers.extend(_double_stage(1 << j, word_bits))
    return layers


def build_g(k: int) -> QuantizedNetwork:
    word_bits = 1 << k
    return QuantizedNetwork(
        input_bits=word_bits,
        weight_bits=1,
        layers=_ones_layers(word_bits, k),
        metadata={"gadget": "g", "universals": k},
    )


def build_universal_gadget(k: int, u: int) -> QuantizedNetwork:
    """Constant word with bit r set iff (r >> u) & 1 (u earlier universals)."""
    if not (0 <= u < k):
        raise ValueError(f"universal block exponent {u} out of range for k={k}")
    word_bits = 1 << k
    layers = _ones_layers(word_bits, k)
    # Ones exactly on [2**u, 2**(u+1)): difference of two low-ones prefixes.
    layers.append(
        _layer(
            [[1], [1]],
            [0, 0],
            word_bits,
            edge_shift=[[word_bits - (1 << (u + 1))], [word_bits - (1 << u)]],
            direction="right",
        )
    )
    layers.append(_layer([[1, -1]], [0], word_bits))
    for j in range(k - u - 1):
        layers.extend(_double_stage(1 << (u + 1 + j), word_bits))
    return QuantizedNetwork(
        input_bits=word_bits,
        weight_bits=1,
        layers=layers,
        metadata={"gadget": "universal", "u": u, "universals": k},
    )


def build_existential_gadget(k: int, u: int) -> QuantizedNetwork:
    """Low 2**u-bit block of the input, tiled 2**(k-u) times across the word."""
    if not (0 <= u <= k):
        raise ValueError(f"existential block exponent {u} out of range for k={k}")
    word_bits = 1 << k
    block = 1 << u
    layers = []
    if block < word_bits:
        # z mod 2**block, computed as z - ((z >> block) << block).
        layers.append(
            _layer([[1], [1]], [0, 0], word_bits, edge_shift=[[0], [block]], direction="right")
        )
        layers.append(
            _layer([[1, -1]], [0], word_bits, edge_shift=[[0, block]], direction="left")
        )
    else:
        layers.append(_layer([[1]], [0], word_bits))
    for j in range(k - u):
        layers.extend(_double_stage(1 << (u + j), word_bits))
    return QuantizedNetwork(
        input_bits=word_bits,
        weight_bits=1,
        layers=layers,
        metadata={"gadget": "existential", "u": u, "universals": k},
    )


@dataclass(frozen=True)
class ReductionInstance:
    """Gadget networks plus the bit-wise matching predicate."""

    qbf: QbfFormula
    universals: int
    word_bits: int
    gadgets: tuple[QuantizedNetwork, ...]
    g: QuantizedNetwork
    block_exponents: tuple[int, ...]

    @property
    def existential_positions(self) -> list[int]:
        return [i for i, (_, q) in enumerate(self.qbf.prefix) if q == EXISTS]


def build_reduction(qbf: QbfFormula, max_universals: int = 4) -> ReductionInstance:
    k = qbf.universal_count
    if k > max_universals:
        raise EncodingError(
            f"{k} universal variables exceed the word-width budget (max {max_universals})"
        )
    word_bits = 1 << k
    gadgets = []
    exponents = []
    seen_universals = 0
    for var, q in qbf.prefix:
        u = seen_universals
        if q == FORALL:
            gadgets.append(build_universal_gadget(k, u))
            seen_universals += 1
        else:
            gadgets.append(build_existential_gadget(k, u))
        exponents.append(u)
    return ReductionInstance(
        qbf=qbf,
        universals=k,
        word_bits=word_bits,
        gadgets=tuple(gadgets),
        g=build_g(k),
        block_exponents=tuple(exponents),
    )


def _matrix_bitwise_int(tree: tuple, values: dict[int, int], mask: int) -> int:
    kind = tree[0]
    if kind == "var":
        return values[tree[1]]
    if kind == "const":
        return mask if tree[1] else 0
    if kind == "not":
        return mask ^ _matrix_bitwise_int(tree[1], values, mask)
    if kind == "and":
        out = mask
        for child in tree[1]:
            out &= _matrix_bitwise_int(child, values, mask)
        return out
    out = 0
    for child in tree[1]:
        out |= _matrix_bitwise_int(child, values, mask)
    return out


def gadget_output(net: QuantizedNetwork, x: int) -> int:
    out = eval_network(net, [x])
    return out[0]


def brute_force_instance(inst: ReductionInstance, guard_bits: int = 16) -> bool:
    """Satisfiability by enumerating existential truth-table blocks only.

    Existential gadget outputs depend only on the low 2**u bits of their
    input, and universal gadgets plus g are constant functions, so this
    enumeration is exhaustive over all network behaviors.
    """
    positions = inst.existential_positions
    free_bits = sum(1 << inst.block_exponents[i] for i in positions)
    if free_bits > guard_bits:
        raise OverflowError(f"instance enumeration needs {free_bits} free bits")
    mask = (1 << inst.word_bits) - 1

    values: dict[int, int] = {}
    for i, (var, q) in enumerate(inst.qbf.prefix):
        if q == FORALL:
            values[var] = gadget_output(inst.gadgets[i], 0)
    g_out = gadget_output(inst.g, 0)

    # Each existential output is a function of its low block alone; tabulate
    # the 2**(2**u) possibilities once, then enumerate over output words.
    tables = [
        [gadget_output(inst.gadgets[i], block) for block in range(1 << (1 << inst.block_exponents[i]))]
        for i in positions
    ]
    for outputs in itertools.product(*tables):
        for pos, word in zip(positions, outputs):
            values[inst.qbf.prefix[pos][0]] = word
        if _matrix_bitwise_int(inst.qbf.matrix, values, mask) == g_out:
            return True
    return False


def _matrix_bitwise_term(tree: tuple, wires: dict[int, bt.BvTerm], width: int) -> bt.BvTerm:
    kind = tree[0]
    if kind == "var":
        return wires[tree[1]]
    if kind == "const":
        return bt.bv_const(width, -1 if tree[1] else 0)
    if kind == "not":
        return bt.bv_bitnot(_matrix_bitwise_term(tree[1], wires, width))
    op = "bvand" if kind == "and" else "bvor"
    children = tree[1]
    if not children:
        return bt.bv_const(width, -1 if kind == "and" else 0)
    out = _matrix_bitwise_term(children[0], wires, width)
    for child in children[1:]:
        out = bt.bv_bitwise(op, out, _matrix_bitwise_term(child, wires, width))
    return out


def encode_instance(inst: ReductionInstance, opts: EncodeOptions = ALL_ON) -> SmtScript:
    """One script: all gadgets over disjoint inputs, matching predicate asserted."""
    script = SmtScript()
    width = inst.word_bits
    input_names: list[str] = []
    output_names: list[str] = []
    word_terms: dict[int, bt.BvTerm] = {}

    def to_word(wire: Wire) -> bt.BvTerm:
        # Gadget outputs live in [0, 2**width - 1]; realign to exactly width bits.
        return _resize(wire, width, signed=False).term

    for i, net in enumerate(inst.gadgets):
        var = inst.qbf.prefix[i][0]
        ins, outs = encode_into(script, net, full_input_box(net), opts, prefix=f"v{var}_")
        input_names.append(ins[0].term.attrs[0])
        output_names.append(outs[0].term.attrs[0])
        word_terms[var] = to_word(outs[0])
    g_ins, g_outs = encode_into(script, inst.g, full_input_box(inst.g), opts, prefix="g_")
    input_names.append(g_ins[0].term.attrs[0])
    output_names.append(g_outs[0].term.attrs[0])

    phi = _matrix_bitwise_term(inst.qbf.matrix, word_terms, width)
    script.assert_(bt.bv_eq(phi, to_word(g_outs[0])))
    script.symbol_map = {
        "inputs": input_names,
        "outputs": output_names,
        "input_bits": width,
        "variables": [var for var, _ in inst.qbf.prefix],
    }
    script.options = opts.as_dict()
    return script


def validate_instance_model(inst: ReductionInstance, model: dict[str, int]) -> bool:
    """Interpreter-side replay of a solver model for the matching predicate."""
    mask = (1 << inst.word_bits) - 1
    values: dict[int, int] = {}
    for i, (var, _) in enumerate(inst.qbf.prefix):
        x = model[f"v{var}_x0"]
        values[var] = gadget_output(inst.gadgets[i], x)
    g_out = gadget_output(inst.g, model["g_x0"])
    return _matrix_bitwise_int(inst.qbf.matrix, values, mask) == g_out
