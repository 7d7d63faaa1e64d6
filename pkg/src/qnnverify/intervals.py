"""Exact integer interval analysis over the fixed-point network semantics.

Every step of the quantized forward pass is either affine or monotone, so
propagating exact endpoint arithmetic layer by layer yields sound (and, per
layer, exact) bounds without widening. Intervals are computed for every node
of each neuron's balanced summation tree, because the encoder sizes one
bit-vector variable per node.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .model import FixedPointLayer, QuantizedNetwork, clamp_relu, round_shift
from .sumplan import ProductLeaf, SummationPlan, fold_plan, plan_for_row


@dataclass(frozen=True)
class Interval:
    """Closed integer interval [lo, hi]."""

    lo: int
    hi: int

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    def __contains__(self, v: int) -> bool:
        return self.lo <= v <= self.hi

    def is_point(self) -> bool:
        return self.lo == self.hi


def point(v: int) -> Interval:
    return Interval(v, v)


def iv_add(a: Interval, b: Interval) -> Interval:
    return Interval(a.lo + b.lo, a.hi + b.hi)


def iv_scale(a: Interval, w: int) -> Interval:
    if w >= 0:
        return Interval(w * a.lo, w * a.hi)
    return Interval(w * a.hi, w * a.lo)


def iv_shift(a: Interval, shift: int, direction: str) -> Interval:
    if shift == 0:
        return a
    if direction == "left":
        return Interval(a.lo << shift, a.hi << shift)
    return Interval(a.lo >> shift, a.hi >> shift)


def iv_round_shift(a: Interval, k: int) -> Interval:
    """Exact image under floor division by 2**k (monotone)."""
    return Interval(round_shift(a.lo, k), round_shift(a.hi, k))


def iv_clamp_relu(a: Interval, bits: int) -> Interval:
    """Exact image under the saturating rectifier (monotone)."""
    return Interval(clamp_relu(a.lo, bits), clamp_relu(a.hi, bits))


def leaf_interval(leaf: ProductLeaf, src: Interval) -> Interval:
    return iv_shift(iv_scale(src, leaf.weight), leaf.shift, leaf.direction)


def affine_interval(w_row: Sequence[int], b: int, ins: Sequence[Interval]) -> Interval:
    """Exact interval of sum_j w_j * t_j + b over independent t_j in ins_j."""
    if len(w_row) != len(ins):
        raise ValueError(f"row length {len(w_row)} vs {len(ins)} input intervals")
    lo = hi = b
    for w, iv in zip(w_row, ins):
        if w >= 0:
            lo += w * iv.lo
            hi += w * iv.hi
        else:
            lo += w * iv.hi
            hi += w * iv.lo
    return Interval(lo, hi)


@dataclass(frozen=True)
class NeuronIntervals:
    """Bounds for every value a single neuron's encoding materializes."""

    plan: SummationPlan
    leaves: tuple[Interval, ...]
    nodes: tuple[Interval, ...]
    pre: Interval
    shifted: Interval
    act: Interval


@dataclass(frozen=True)
class IntervalMap:
    """Sound bounds for every wire of a network under an input box."""

    inputs: tuple[Interval, ...]
    layers: tuple[tuple[NeuronIntervals, ...], ...]

    def activations(self, layer_index: int) -> tuple[Interval, ...]:
        """Interval vector flowing out of `layer_index` (-1 = network input)."""
        if layer_index < 0:
            return self.inputs
        return tuple(n.act for n in self.layers[layer_index])

    def to_json_dict(self) -> dict:
        def pair(iv: Interval) -> list[int]:
            return [iv.lo, iv.hi]

        return {
            "inputs": [pair(iv) for iv in self.inputs],
            "layers": [
                [
                    {
                        "pre": pair(n.pre),
                        "shifted": pair(n.shifted),
                        "act": pair(n.act),
                        "tree_nodes": [pair(t) for t in n.nodes],
                    }
                    for n in layer
                ]
                for layer in self.layers
            ],
        }


def input_intervals_for_ball(
    sample: Sequence[int], epsilon: int, input_bits: int
) -> list[Interval]:
    """Per-pixel intervals of the L-infinity ball, clipped to the input domain."""
    if epsilon < 0:
        raise ValueError(f"epsilon must be non-negative, got {epsilon}")
    top = (1 << input_bits) - 1
    out = []
    for i, v in enumerate(sample):
        if not (0 <= v <= top):
            raise ValueError(f"sample component {i} = {v} outside [0, {top}]")
        out.append(Interval(max(0, v - epsilon), min(top, v + epsilon)))
    return out


def propagate_neuron(plan: SummationPlan, ins: Sequence[Interval], bit_shift: int,
                     clamp_bits: int) -> NeuronIntervals:
    leaf_ivs = [leaf_interval(leaf, ins[leaf.src]) for leaf in plan.leaves]
    nodes, root = fold_plan(plan, leaf_ivs, iv_add)
    if root is None:
        pre = point(plan.bias)
    elif plan.bias != 0:
        pre = iv_add(root, point(plan.bias))
    else:
        pre = root
    shifted = iv_round_shift(pre, bit_shift)
    act = iv_clamp_relu(shifted, clamp_bits)
    return NeuronIntervals(
        plan=plan,
        leaves=tuple(leaf_ivs),
        nodes=tuple(nodes),
        pre=pre,
        shifted=shifted,
        act=act,
    )


def propagate_layer(layer: FixedPointLayer, ins: Sequence[Interval]) -> list[NeuronIntervals]:
    if len(ins) != layer.n_in:
        raise ValueError(f"layer expects {layer.n_in} input intervals, got {len(ins)}")
    return [
        propagate_neuron(plan_for_row(layer, i), ins, layer.bit_shift[i], layer.clamp_bits[i])
        for i in range(layer.n_out)
    ]


def propagate_network(net: QuantizedNetwork, ins: Sequence[Interval]) -> IntervalMap:
    top = (1 << net.input_bits) - 1
    for i, iv in enumerate(ins):
        if iv.lo < 0 or iv.hi > top:
            raise ValueError(f"input interval {i} = [{iv.lo}, {iv.hi}] outside [0, {top}]")
    layers = []
    current: Sequence[Interval] = tuple(ins)
    for layer in net.layers:
        neurons = propagate_layer(layer, current)
        layers.append(tuple(neurons))
        current = tuple(n.act for n in neurons)
    return IntervalMap(inputs=tuple(ins), layers=tuple(layers))


def full_input_box(net: QuantizedNetwork) -> list[Interval]:
    """The whole input domain [0, 2**input_bits - 1]^n."""
    top = (1 << net.input_bits) - 1
    return [Interval(0, top) for _ in range(net.n_inputs)]
