"""Compilation of networks and robustness queries to QF_BV scripts.

Three independently toggleable simplification passes sit on top of a balanced
summation baseline:

* dead_branch_removal: replaces the two-sided saturation clamp by the cheapest
  form its interval admits (constant, identity, one-sided, or full clamp).
* minimal_bits: sizes every arithmetic wire at the smallest two's-complement
  width containing its interval, instead of the static worst-case width.
* redundancy_elimination: plans one multiplication per distinct needed
  product of a source neuron, deriving the rest by reuse, negation, or shift.

Soundness of narrow widths rests on congruence: addition, multiplication by a
constant, negation, and left shift, computed mod 2**w, are exact whenever the
true result fits w signed bits, regardless of how operands were truncated.
Comparisons, arithmetic right shifts, and clamps are computed at widths that
hold their operands' full values, which the interval analysis guarantees.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import bvterm as bt
from .bvterm import BvTerm, SmtScript
from .errors import EncodingError
from .intervals import (
    Interval,
    full_input_box,
    input_intervals_for_ball,
    iv_clamp_relu,
    iv_scale,
    point,
    propagate_layer,
)
from .model import QuantizedNetwork


@dataclass(frozen=True)
class EncodeOptions:
    dead_branch_removal: bool = True
    minimal_bits: bool = True
    redundancy_elimination: bool = True

    def as_dict(self) -> dict:
        return {
            "dead_branch_removal": self.dead_branch_removal,
            "minimal_bits": self.minimal_bits,
            "redundancy_elimination": self.redundancy_elimination,
        }


ALL_ON = EncodeOptions(True, True, True)
BASELINE = EncodeOptions(False, False, False)


def naive_bits(k: int, n: int) -> int:
    """Static accumulator width for n products of k-bit operands."""
    if k < 1 or n < 1:
        raise ValueError(f"naive_bits needs k >= 1 and n >= 1, got {k}, {n}")
    return 2 * k + (n - 1).bit_length() + 1


def minimal_bits(iv: Interval) -> int:
    """Smallest width whose two's-complement range contains the interval."""
    magnitude = 0
    if iv.hi > 0:
        magnitude = iv.hi.bit_length()
    if iv.lo < 0:
        magnitude = max(magnitude, (-iv.lo - 1).bit_length())
    return magnitude + 1


# --------------------------------------------------------------------------
# Multiplication redundancy planning
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MulAction:
    """How one outgoing weight's product is obtained.

    kind: "zero" | "identity" | "fresh" | "reuse" | "neg_reuse" | "shift_reuse"
    base: the materialized weight being reused (reuse kinds only).
    shift: left-shift distance (shift_reuse only).
    """

    kind: str
    base: int | None = None
    shift: int = 0


def plan_redundancy_elimination(weights: Sequence[int]) -> list[MulAction]:
    """One action per weight position; only "fresh" weights cost a multiply.

    Weights are processed in ascending |w| (positive before negative at equal
    magnitude); the pool of materialized multiplications is searched in
    insertion order and only fresh multiplications extend it.
    """
    order = sorted(range(len(weights)), key=lambda i: (abs(weights[i]), weights[i] < 0))
    actions: list[MulAction | None] = [None] * len(weights)
    pool: list[int] = []
    for i in order:
        w = weights[i]
        actions[i] = _plan_one(w, pool)
    return actions  # type: ignore[return-value]


def _plan_one(w: int, pool: list[int]) -> MulAction:
    if w == 0:
        return MulAction("zero")
    if w == 1:
        return MulAction("identity")
    for v in pool:
        if w == v:
            return MulAction("reuse", base=v)
    for v in pool:
        if w == -v:
            return MulAction("neg_reuse", base=v)
    for v in pool:
        if v != 0:
            m = 1
            while abs(v) << m <= abs(w):
                if v << m == w:
                    return MulAction("shift_reuse", base=v, shift=m)
                m += 1
    pool.append(w)
    return MulAction("fresh")


# --------------------------------------------------------------------------
# Wires
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Wire:
    """A bit-vector term annotated with width, signedness, and a sound interval."""

    term: BvTerm
    width: int
    signed: bool
    iv: Interval


def _resize(w: Wire, width: int, signed: bool = True) -> Wire:
    """Re-width a wire, extending by its own signedness.

    Widening preserves the value exactly; narrowing preserves it mod 2**width
    (callers narrow only to widths the value is known to fit).
    """
    if width == w.width:
        term = w.term
    elif width > w.width:
        term = bt.bv_sext(w.term, width) if w.signed else bt.bv_zext(w.term, width)
    else:
        term = bt.bv_extract(w.term, width - 1, 0)
    return Wire(term, width, signed, w.iv)


def _const_wire(value: int, width: int | None = None) -> Wire:
    if width is None:
        width = minimal_bits(point(value))
    return Wire(bt.bv_const(width, value), width, True, point(value))


def _cmp(base: str, a: Wire, b: Wire) -> BvTerm:
    """Width-safe comparison on wire values (base in lt/le/gt/ge)."""
    if a.signed == b.signed:
        width = max(a.width, b.width)
        op = ("bvs" if a.signed else "bvu") + base
    else:
        width = max(a.width + (0 if a.signed else 1), b.width + (0 if b.signed else 1))
        op = "bvs" + base
    return bt.bv_cmp(op, _resize(a, width).term, _resize(b, width).term)


# --------------------------------------------------------------------------
# Per-layer encoding
# --------------------------------------------------------------------------


def _weight_name(w: int) -> str:
    return f"m{-w}" if w < 0 else str(w)


class _LayerSizer:
    """Width policy for one layer under one option set."""

    def __init__(self, k_eff: int, use_minimal: bool):
        self.k_eff = k_eff
        self.use_minimal = use_minimal
        self.base = 2 * k_eff + 1

    def leaf(self, ball_iv: Interval, full_iv: Interval) -> int:
        if self.use_minimal:
            return minimal_bits(ball_iv)
        return max(self.base, minimal_bits(full_iv))

    def node(self, ball_iv: Interval, child_widths: tuple[int, int]) -> int:
        if self.use_minimal:
            return minimal_bits(ball_iv)
        return max(child_widths) + 1

    def bias_node(self, ball_iv: Interval, root_width: int, bias: int) -> int:
        if self.use_minimal:
            return minimal_bits(ball_iv)
        return max(root_width, minimal_bits(point(bias))) + 1

    def bias_only(self, bias: int) -> int:
        if self.use_minimal:
            return minimal_bits(point(bias))
        return max(self.base, minimal_bits(point(bias)))


def _encode_relu_n(
    shifted: Wire,
    n_bits: int,
    ball: Interval,
    opts: EncodeOptions,
) -> Wire:
    """Clamp a neuron's rounded accumulator into [0, 2**n_bits - 1]."""
    top = (1 << n_bits) - 1
    act_iv = iv_clamp_relu(ball, n_bits)

    def finish(w: Wire) -> Wire:
        if opts.minimal_bits:
            out = _resize(w, minimal_bits(act_iv), signed=True)
        else:
            out = _resize(w, n_bits, signed=False)
        return Wire(out.term, out.width, out.signed, act_iv)

    if opts.dead_branch_removal:
        lb, ub = ball.lo, ball.hi
        if ub <= 0:
            return finish(_const_wire(0))
        if lb >= top:
            return finish(_const_wire(top))
        if lb >= 0 and ub <= top:
            return finish(shifted)
        if lb < 0 and ub <= top:
            zero = _const_wire(0, shifted.width)
            term = bt.bv_ite(_cmp("lt", shifted, zero), zero.term, shifted.term)
            return finish(Wire(term, shifted.width, True, ball))
        if lb >= 0 and ub > top:
            width = max(shifted.width, n_bits + 1)
            x = _resize(shifted, width)
            cap = _const_wire(top, width)
            term = bt.bv_ite(_cmp("gt", x, cap), cap.term, x.term)
            return finish(Wire(term, width, True, ball))

    width = max(shifted.width, n_bits + 1)
    x = _resize(shifted, width)
    zero = _const_wire(0, width)
    cap = _const_wire(top, width)
    inner = bt.bv_ite(_cmp("gt", x, cap), cap.term, x.term)
    term = bt.bv_ite(_cmp("lt", x, zero), zero.term, inner)
    return finish(Wire(term, width, True, ball))


def _encode_layer(
    script: SmtScript,
    net: QuantizedNetwork,
    layer_index: int,
    in_wires: list[Wire],
    ball_ins: list[Interval],
    full_ins: list[Interval],
    opts: EncodeOptions,
    prefix: str,
) -> tuple[list[Wire], list[Interval], list[Interval]]:
    layer = net.layers[layer_index]
    in_bits = max(w.width for w in in_wires)
    k_eff = max(net.weight_bits, in_bits)
    sizer = _LayerSizer(k_eff, opts.minimal_bits)

    ball_neurons = propagate_layer(layer, ball_ins)
    full_neurons = propagate_layer(layer, full_ins)

    # Plan and materialize shared products per source neuron.
    products: dict[tuple[int, int], Wire] = {}
    actions: dict[tuple[int, int], MulAction] = {}
    if opts.redundancy_elimination:
        for j in range(layer.n_in):
            column = [layer.weights[i][j] for i in range(layer.n_out)]
            for i, action in enumerate(plan_redundancy_elimination(column)):
                actions[(i, j)] = action
        order = sorted(
            (j, i)
            for (i, j), action in actions.items()
            if action.kind == "fresh"
        )
        seen: set[tuple[int, int]] = set()
        for j, i in order:
            w = layer.weights[i][j]
            if (j, w) in seen:
                continue
            seen.add((j, w))
            ball_p = iv_scale(ball_ins[j], w)
            full_p = iv_scale(full_ins[j], w)
            width = sizer.leaf(ball_p, full_p)
            src = _resize(in_wires[j], width)
            term = bt.bv_mul(bt.bv_const(width, w), src.term)
            name = f"{prefix}p{layer_index}_s{j}_{_weight_name(w)}"
            ref = script.define(name, term)
            products[(j, w)] = Wire(ref, width, True, ball_p)

    def leaf_product(i: int, j: int, w: int, width: int) -> BvTerm:
        """The product w * x_j at `width`, mod-2**width exact."""
        if not opts.redundancy_elimination:
            src = _resize(in_wires[j], width)
            return bt.bv_mul(bt.bv_const(width, w), src.term)
        action = actions[(i, j)]
        if action.kind == "identity":
            return _resize(in_wires[j], width).term
        if action.kind == "fresh":
            return _resize(products[(j, w)], width).term
        if action.kind == "reuse":
            return _resize(products[(j, action.base)], width).term
        if action.kind == "neg_reuse":
            return bt.bv_neg(_resize(products[(j, action.base)], width).term)
        if action.kind == "shift_reuse":
            return bt.bv_shl(_resize(products[(j, action.base)], width).term, action.shift)
        raise EncodingError(f"unexpected plan action {action.kind}")

    out_wires: list[Wire] = []
    for i in range(layer.n_out):
        plan = ball_neurons[i].plan
        ball_n, full_n = ball_neurons[i], full_neurons[i]

        leaf_wires: list[Wire] = []
        for idx, leaf in enumerate(plan.leaves):
            ball_iv = ball_n.leaves[idx]
            width = sizer.leaf(ball_iv, full_n.leaves[idx])
            if leaf.shift == 0:
                term = leaf_product(i, leaf.src, leaf.weight, width)
            elif leaf.direction == "left":
                term = bt.bv_shl(leaf_product(i, leaf.src, leaf.weight, width), leaf.shift)
            else:
                # Right shifts need the unshifted product at full value width.
                ball_p = iv_scale(ball_ins[leaf.src], leaf.weight)
                full_p = iv_scale(full_ins[leaf.src], leaf.weight)
                pw = sizer.leaf(ball_p, full_p)
                prod = Wire(leaf_product(i, leaf.src, leaf.weight, pw), pw, True, ball_p)
                shifted = Wire(bt.bv_ashr(prod.term, leaf.shift), pw, True, ball_iv)
                term = _resize(shifted, width).term
            leaf_wires.append(Wire(term, width, True, ball_iv))

        if not plan.leaves:
            pre = _const_wire(plan.bias, sizer.bias_only(plan.bias))
            pre = Wire(pre.term, pre.width, True, point(plan.bias))
        else:
            vals = list(leaf_wires)
            for m, (a, b) in enumerate(plan.merges):
                ball_iv = ball_n.nodes[m]
                wa, wb = vals[a], vals[b]
                width = sizer.node(ball_iv, (wa.width, wb.width))
                term = bt.bv_add(_resize(wa, width).term, _resize(wb, width).term)
                vals.append(Wire(term, width, True, ball_iv))
            root = vals[-1]
            if plan.bias != 0:
                width = sizer.bias_node(ball_n.pre, root.width, plan.bias)
                term = bt.bv_add(_resize(root, width).term, bt.bv_const(width, plan.bias))
                pre = Wire(term, width, True, ball_n.pre)
            else:
                pre = root

        k_shift = layer.bit_shift[i]
        if k_shift == 0:
            shifted = pre
        else:
            shifted = Wire(bt.bv_ashr(pre.term, k_shift), pre.width, True, ball_n.shifted)
            if opts.minimal_bits:
                shifted = _resize(shifted, minimal_bits(ball_n.shifted))
                shifted = Wire(shifted.term, shifted.width, True, ball_n.shifted)

        act = _encode_relu_n(shifted, layer.clamp_bits[i], ball_n.shifted, opts)
        name = f"{prefix}y{layer_index}_{i}"
        ref = script.define(name, act.term)
        out_wires.append(Wire(ref, act.width, act.signed, act.iv))

    return (
        out_wires,
        [w.iv for w in out_wires],
        [f.act for f in full_neurons],
    )


def encode_into(
    script: SmtScript,
    net: QuantizedNetwork,
    ins: list[Interval],
    opts: EncodeOptions,
    prefix: str = "",
) -> tuple[list[Wire], list[Wire]]:
    """Encode one network into `script`; returns (input wires, output wires)."""
    if len(ins) != net.n_inputs:
        raise EncodingError(f"expected {net.n_inputs} input intervals, got {len(ins)}")
    top = (1 << net.input_bits) - 1
    in_wires = []
    for j, iv in enumerate(ins):
        if iv.lo < 0 or iv.hi > top:
            raise EncodingError(f"input interval {j} outside the input domain")
        ref = script.declare(f"{prefix}x{j}", net.input_bits)
        in_wires.append(Wire(ref, net.input_bits, False, iv))
        if iv.lo > 0:
            script.assert_(bt.bv_cmp("bvuge", ref, bt.bv_const(net.input_bits, iv.lo)))
        if iv.hi < top:
            script.assert_(bt.bv_cmp("bvule", ref, bt.bv_const(net.input_bits, iv.hi)))

    ball_ins = list(ins)
    full_ins = full_input_box(net)
    wires = in_wires
    for t in range(len(net.layers)):
        wires, ball_ins, full_ins = _encode_layer(
            script, net, t, wires, ball_ins, full_ins, opts, prefix
        )
    return in_wires, wires


def _collect_stats(script: SmtScript) -> dict:
    counts = {"ite": 0, "mul": 0, "add": 0, "nodes": 0}
    max_width = 0

    def walk(t: BvTerm) -> None:
        nonlocal max_width
        counts["nodes"] += 1
        max_width = max(max_width, t.width)
        if t.kind in counts:
            counts[t.kind] += 1
        for a in t.args:
            walk(a)

    for _, _, term in script.definitions:
        walk(term)
    for term in script.assertions:
        walk(term)
    return {
        "ite_count": counts["ite"],
        "mul_count": counts["mul"],
        "add_count": counts["add"],
        "node_count": counts["nodes"],
        "max_width": max_width,
    }


def encode_network(
    net: QuantizedNetwork,
    ins: Sequence[Interval] | None = None,
    opts: EncodeOptions = ALL_ON,
) -> SmtScript:
    """Encode the network's input/output relation over the given input box."""
    script = SmtScript()
    box = list(ins) if ins is not None else full_input_box(net)
    in_wires, out_wires = encode_into(script, net, box, opts)
    script.symbol_map = {
        "inputs": [w.term.attrs[0] for w in in_wires],
        "outputs": [w.term.attrs[0] for w in out_wires],
        "output_widths": [w.width for w in out_wires],
        "output_signed": [w.signed for w in out_wires],
        "input_bits": net.input_bits,
    }
    script.options = opts.as_dict()
    script.stats = _collect_stats(script)
    return script


def misclassification_assertion(out_wires: list[Wire], label: int) -> BvTerm:
    """Negation of `argmax(outputs) == label` under lowest-index tie-break."""
    clauses = []
    for c, wire in enumerate(out_wires):
        if c == label:
            continue
        base = "ge" if c < label else "gt"
        clauses.append(_cmp(base, wire, out_wires[label]))
    return bt.bool_or(clauses)


def encode_robustness_query(
    net: QuantizedNetwork,
    sample: Sequence[int],
    label: int,
    epsilon: int,
    opts: EncodeOptions = ALL_ON,
) -> SmtScript:
    """Sat iff some input within the epsilon ball is classified differently."""
    if not (0 <= label < net.n_outputs):
        raise EncodingError(f"label {label} out of range for {net.n_outputs} outputs")
    ins = input_intervals_for_ball(sample, epsilon, net.input_bits)
    script = SmtScript()
    in_wires, out_wires = encode_into(script, net, ins, opts)
    script.assert_(misclassification_assertion(out_wires, label))
    script.symbol_map = {
        "inputs": [w.term.attrs[0] for w in in_wires],
        "outputs": [w.term.attrs[0] for w in out_wires],
        "output_widths": [w.width for w in out_wires],
        "output_signed": [w.signed for w in out_wires],
        "input_bits": net.input_bits,
        "sample": list(sample),
        "label": label,
        "epsilon": epsilon,
    }
    script.options = opts.as_dict()
    script.stats = _collect_stats(script)
    return script


def accumulator_width_report(
    net: QuantizedNetwork, ins: Sequence[Interval] | None = None
) -> list[dict]:
    """Per-neuron naive vs minimal accumulator widths under an input box."""
    box = list(ins) if ins is not None else full_input_box(net)
    current = box
    in_bits = net.input_bits
    rows = []
    for t, layer in enumerate(net.layers):
        k_eff = max(net.weight_bits, in_bits)
        neurons = propagate_layer(layer, current)
        for i, rec in enumerate(neurons):
            n_products = max(1, len(rec.plan.leaves))
            rows.append(
                {
                    "layer": t,
                    "neuron": i,
                    "summands": n_products,
                    "naive": naive_bits(k_eff, n_products),
                    "minimal": minimal_bits(rec.pre),
                }
            )
        current = [rec.act for rec in neurons]
        in_bits = max(layer.clamp_bits)
    return rows
