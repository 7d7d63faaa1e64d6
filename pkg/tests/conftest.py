"""Shared fixtures: an independent reference evaluator and network generators.

The reference evaluator here deliberately avoids the library's arithmetic
helpers (shifts, clamps) and recomputes everything from first principles with
exact rationals, so library bugs cannot hide in both places at once.
"""

from __future__ import annotations

import math
import random
from fractions import Fraction

import pytest

from qnnverify.model import FixedPointLayer, QuantizedNetwork
from qnnverify.solver import default_solver_config

# --------------------------------------------------------------------------
# independent reference semantics


def ref_edge(w: int, x: int, shift: int, direction: str) -> int:
    product = w * x
    if shift == 0:
        return product
    if direction == "left":
        return product * 2**shift
    return math.floor(Fraction(product, 2**shift))


def ref_layer(layer: FixedPointLayer, xs: list[int]) -> tuple[list[int], list[int], list[int]]:
    """Returns (pre-shift sums, shifted values, activations)."""
    pres, mids, outs = [], [], []
    for i in range(layer.n_out):
        acc = 0
        for j, x in enumerate(xs):
            shift = layer.edge_shift[i][j] if layer.edge_shift is not None else 0
            acc += ref_edge(layer.weights[i][j], x, shift, layer.edge_shift_dir)
        acc += layer.bias[i]
        mid = math.floor(Fraction(acc, 2 ** layer.bit_shift[i]))
        top = 2 ** layer.clamp_bits[i] - 1
        out = max(0, min(top, mid))
        pres.append(acc)
        mids.append(mid)
        outs.append(out)
    return pres, mids, outs


def ref_forward(net: QuantizedNetwork, xs: list[int]) -> list[int]:
    values = list(xs)
    for layer in net.layers:
        values = ref_layer(layer, values)[2]
    return values


def ref_classify(net: QuantizedNetwork, xs: list[int]) -> int:
    outs = ref_forward(net, xs)
    best = max(outs)
    return outs.index(best)


# --------------------------------------------------------------------------
# generators


def rand_net(
    rng: random.Random,
    n_inputs: int | None = None,
    max_layers: int = 2,
    max_neurons: int = 4,
    input_bits: int = 3,
    weight_bits: int = 3,
    max_shift: int = 3,
    max_clamp: int = 3,
    allow_edge_shift: bool = False,
) -> QuantizedNetwork:
    dims = [n_inputs if n_inputs is not None else rng.randint(1, max_neurons)]
    for _ in range(rng.randint(1, max_layers)):
        dims.append(rng.randint(1, max_neurons))
    w_top = 2 ** (weight_bits - 1) - 1
    layers = []
    for n_in, n_out in zip(dims, dims[1:]):
        edge_shift = None
        direction = "left"
        if allow_edge_shift and rng.random() < 0.5:
            edge_shift = [[rng.randint(0, 2) for _ in range(n_in)] for _ in range(n_out)]
            direction = rng.choice(["left", "right"])
        layers.append(
            FixedPointLayer(
                weights=[[rng.randint(-w_top, w_top) for _ in range(n_in)] for _ in range(n_out)],
                bias=[rng.randint(-2 * w_top, 2 * w_top) for _ in range(n_out)],
                bit_shift=[rng.randint(0, max_shift) for _ in range(n_out)],
                clamp_bits=[rng.randint(1, max_clamp) for _ in range(n_out)],
                edge_shift=edge_shift,
                edge_shift_dir=direction,
            )
        )
    return QuantizedNetwork(input_bits=input_bits, weight_bits=weight_bits, layers=layers)


def all_inputs(net: QuantizedNetwork):
    """Every point of the full input domain (exhaustive; keep nets tiny)."""
    import itertools

    top = 2**net.input_bits - 1
    yield from itertools.product(range(top + 1), repeat=net.n_inputs)


# --------------------------------------------------------------------------
# fixtures


@pytest.fixture(scope="session")
def micro_net() -> QuantizedNetwork:
    """One 2-bit input; output 0 copies it, output 1 doubles and clamps at 3."""
    return QuantizedNetwork(
        input_bits=2,
        weight_bits=3,
        layers=[
            FixedPointLayer(
                weights=[[1], [2]],
                bias=[0, 0],
                bit_shift=[0, 0],
                clamp_bits=[2, 2],
            )
        ],
    )


@pytest.fixture(scope="session")
def solver_config():
    try:
        return default_solver_config(timeout_secs=60.0)
    except Exception as exc:  # pragma: no cover - environment-dependent
        pytest.skip(f"no SMT solver available: {exc}")


def random_qbf(rng: random.Random, max_vars: int = 6, max_universals: int = 3):
    """Random prenex CNF whose existential blocks fit the enumeration guard."""
    from qnnverify.qbf import EXISTS, FORALL, QbfFormula

    while True:
        n = rng.randint(1, max_vars)
        prefix = []
        universals = 0
        free_bits = 0
        ok = True
        for v in range(1, n + 1):
            q = rng.choice([FORALL, EXISTS])
            if q == FORALL:
                if universals == max_universals:
                    q = EXISTS
                else:
                    universals += 1
            if q == EXISTS:
                free_bits += 1 << universals
                if free_bits > 16:
                    ok = False
                    break
            prefix.append((v, q))
        if not ok:
            continue
        clauses = []
        for _ in range(rng.randint(1, 5)):
            lits = []
            for v in range(1, n + 1):
                r = rng.random()
                if r < 0.4:
                    lits.append(("var", v))
                elif r < 0.7:
                    lits.append(("not", ("var", v)))
            clauses.append(("or", tuple(lits)))
        return QbfFormula(prefix=tuple(prefix), matrix=("and", tuple(clauses)), n_vars=n)
