"""Fixed-point network model: types, JSON loader, bit-exact interpreter.

All arithmetic is unbounded Python integer arithmetic; nothing here depends on
machine word sizes. A compiled kernel with identical semantics may take over
hot evaluation loops (see `_dispatch`), but this module is the reference.

Semantics of one layer on input vector x:

    pre_i  = sum_j shift(w[i][j] * x[j]) + b[i]      (shift: optional per-edge)
    mid_i  = floor(pre_i / 2**bit_shift[i])
    out_i  = max(0, min(2**clamp_bits[i] - 1, mid_i))

Per-edge shifts multiply (direction "left") or floor-divide (direction
"right") the product w[i][j] * x[j] by 2**edge_shift[i][j] before summation.
Plain models have no edge shifts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

from .errors import ModelFormatError

FORMAT_VERSION = 1


@dataclass
class FixedPointLayer:
    """One affine + shift + clamp layer.

    weights:   n_out x n_in integer matrix.
    bias:      n_out integers (unbounded).
    bit_shift: per-neuron right-shift amount applied to the accumulated sum.
    clamp_bits: per-neuron output width N; outputs saturate into [0, 2**N - 1].
    edge_shift: optional n_out x n_in matrix of non-negative shift amounts
                applied to individual products, direction given by
                edge_shift_dir ("left" multiplies, "right" floor-divides).
    """

    weights: list[list[int]]
    bias: list[int]
    bit_shift: list[int]
    clamp_bits: list[int]
    edge_shift: list[list[int]] | None = None
    edge_shift_dir: str = "left"

    @property
    def n_out(self) -> int:
        return len(self.weights)

    @property
    def n_in(self) -> int:
        return len(self.weights[0]) if self.weights else 0


@dataclass
class QuantizedNetwork:
    """A sequence of fixed-point layers plus input/weight width declarations.

    input_bits:  width of the unsigned input variables (inputs lie in
                 [0, 2**input_bits - 1]).
    weight_bits: declared weight width; every |w| < 2**weight_bits.
    """

    input_bits: int
    weight_bits: int
    layers: list[FixedPointLayer]
    metadata: dict = field(default_factory=dict)

    @property
    def n_inputs(self) -> int:
        return self.layers[0].n_in

    @property
    def n_outputs(self) -> int:
        return self.layers[-1].n_out

    def activation_bits(self, layer_index: int) -> list[int]:
        """Widths of the value vector flowing OUT of layer `layer_index`.

        Index -1 (or equivalently the convention "before layer 0") is the
        network input: uniform `input_bits`.
        """
        if layer_index < 0:
            return [self.input_bits] * self.n_inputs
        return list(self.layers[layer_index].clamp_bits)


def round_shift(value: int, shift: int) -> int:
    """Floor division by a power of two (arithmetic right shift)."""
    if shift < 0:
        raise ValueError(f"shift must be non-negative, got {shift}")
    return value >> shift


def clamp_relu(value: int, bits: int) -> int:
    """Saturating rectifier: clamp into [0, 2**bits - 1]."""
    if value <= 0:
        return 0
    top = (1 << bits) - 1
    return top if value > top else value


def _edge_term(w: int, x: int, shift: int, direction: str) -> int:
    p = w * x
    if shift == 0:
        return p
    if direction == "left":
        return p << shift
    return p >> shift


def eval_layer(layer: FixedPointLayer, x: Sequence[int]) -> list[int]:
    """Evaluate one layer on an integer input vector."""
    if len(x) != layer.n_in:
        raise ValueError(f"layer expects {layer.n_in} inputs, got {len(x)}")
    out = []
    es = layer.edge_shift
    for i, row in enumerate(layer.weights):
        if es is None:
            acc = layer.bias[i] + sum(w * xj for w, xj in zip(row, x))
        else:
            acc = layer.bias[i]
            for j, w in enumerate(row):
                if w:
                    acc += _edge_term(w, x[j], es[i][j], layer.edge_shift_dir)
        out.append(clamp_relu(round_shift(acc, layer.bit_shift[i]), layer.clamp_bits[i]))
    return out


def eval_layer_trace(
    layer: FixedPointLayer, x: Sequence[int]
) -> tuple[list[int], list[int], list[int]]:
    """Evaluate one layer, returning the (pre-shift, post-shift, output) vectors.

    The pre-shift value is the raw accumulator; the post-shift value is the
    accumulator after the right shift but before the clamp, so it can be
    negative or exceed the output range.
    """
    if len(x) != layer.n_in:
        raise ValueError(f"layer expects {layer.n_in} inputs, got {len(x)}")
    pre: list[int] = []
    mid: list[int] = []
    out: list[int] = []
    es = layer.edge_shift
    for i, row in enumerate(layer.weights):
        if es is None:
            acc = layer.bias[i] + sum(w * xj for w, xj in zip(row, x))
        else:
            acc = layer.bias[i]
            for j, w in enumerate(row):
                if w:
                    acc += _edge_term(w, x[j], es[i][j], layer.edge_shift_dir)
        m = round_shift(acc, layer.bit_shift[i])
        pre.append(acc)
        mid.append(m)
        out.append(clamp_relu(m, layer.clamp_bits[i]))
    return pre, mid, out


def eval_network_trace(
    net: QuantizedNetwork, x: Sequence[int]
) -> list[tuple[list[int], list[int], list[int]]]:
    """Forward pass keeping every layer's intermediate integer vectors."""
    check_input_range(net, x)
    vec = list(x)
    traces = []
    for layer in net.layers:
        pre, mid, out = eval_layer_trace(layer, vec)
        traces.append((pre, mid, out))
        vec = out
    return traces


def check_input_range(net: QuantizedNetwork, x: Sequence[int]) -> None:
    if len(x) != net.n_inputs:
        raise ValueError(f"network expects {net.n_inputs} inputs, got {len(x)}")
    hi = (1 << net.input_bits) - 1
    for j, v in enumerate(x):
        if not (0 <= v <= hi):
            raise ValueError(f"input {j} = {v} outside [0, {hi}]")


def eval_network(net: QuantizedNetwork, x: Sequence[int]) -> list[int]:
    """Run the full forward pass, returning the output-layer vector."""
    check_input_range(net, x)
    vec = list(x)
    for layer in net.layers:
        vec = eval_layer(layer, vec)
    return vec


def argmax_lowest(values: Sequence[int]) -> int:
    """Index of the maximum, lowest index winning ties."""
    best = 0
    for i in range(1, len(values)):
        if values[i] > values[best]:
            best = i
    return best


def classify(net: QuantizedNetwork, x: Sequence[int]) -> int:
    """Predicted class: argmax over outputs with lowest-index tie-break."""
    return argmax_lowest(eval_network(net, x))


# --------------------------------------------------------------------------
# JSON model format
# --------------------------------------------------------------------------


def _require_int(value: object, what: str) -> int:
    # bool is an int subclass; JSON true/false must not sneak in as 1/0.
    if isinstance(value, bool) or not isinstance(value, int):
        raise ModelFormatError(f"{what} must be an integer, got {value!r}")
    return value


def _int_vector(value: object, length: int, what: str) -> list[int]:
    if not isinstance(value, list) or len(value) != length:
        raise ModelFormatError(f"{what} must be a list of {length} integers")
    return [_require_int(v, what) for v in value]


def _int_matrix(value: object, rows: int, cols: int, what: str) -> list[list[int]]:
    if not isinstance(value, list) or len(value) != rows:
        raise ModelFormatError(f"{what} must be a {rows}x{cols} integer matrix")
    return [_int_vector(r, cols, what) for r in value]


def network_from_dict(data: dict) -> QuantizedNetwork:
    """Validate and construct a network from parsed JSON data."""
    if not isinstance(data, dict):
        raise ModelFormatError("model root must be a JSON object")
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format_version {version!r}")
    input_bits = _require_int(data.get("input_bits"), "input_bits")
    weight_bits = _require_int(data.get("weight_bits"), "weight_bits")
    if input_bits < 1 or weight_bits < 1:
        raise ModelFormatError("input_bits and weight_bits must be >= 1")
    raw_layers = data.get("layers")
    if not isinstance(raw_layers, list) or not raw_layers:
        raise ModelFormatError("layers must be a non-empty list")

    w_limit = 1 << weight_bits
    layers = []
    prev_out: int | None = None
    for t, raw in enumerate(raw_layers):
        if not isinstance(raw, dict):
            raise ModelFormatError(f"layer {t} must be an object")
        raw_w = raw.get("weights")
        if not isinstance(raw_w, list) or not raw_w or not isinstance(raw_w[0], list):
            raise ModelFormatError(f"layer {t} weights must be a non-empty matrix")
        n_out, n_in = len(raw_w), len(raw_w[0])
        if n_in == 0:
            raise ModelFormatError(f"layer {t} has zero-width rows")
        if prev_out is not None and n_in != prev_out:
            raise ModelFormatError(
                f"layer {t} expects {n_in} inputs but layer {t - 1} has {prev_out} outputs"
            )
        weights = _int_matrix(raw_w, n_out, n_in, f"layer {t} weights")
        for row in weights:
            for w in row:
                if abs(w) >= w_limit:
                    raise ModelFormatError(
                        f"layer {t}: weight exceeds declared width ({w} vs {weight_bits} bits)"
                    )
        bias = _int_vector(raw.get("bias"), n_out, f"layer {t} bias")
        bit_shift = _int_vector(raw.get("bit_shift"), n_out, f"layer {t} bit_shift")
        clamp_bits = _int_vector(raw.get("clamp_bits"), n_out, f"layer {t} clamp_bits")
        if any(s < 0 for s in bit_shift):
            raise ModelFormatError(f"layer {t}: bit_shift must be non-negative")
        if any(n < 1 for n in clamp_bits):
            raise ModelFormatError(f"layer {t}: clamp_bits must be >= 1")

        edge_shift = None
        edge_dir = "left"
        if "edge_shift" in raw:
            edge_shift = _int_matrix(raw["edge_shift"], n_out, n_in, f"layer {t} edge_shift")
            if any(e < 0 for row in edge_shift for e in row):
                raise ModelFormatError(f"layer {t}: edge_shift must be non-negative")
            edge_dir = raw.get("edge_shift_dir", "left")
            if edge_dir not in ("left", "right"):
                raise ModelFormatError(f"layer {t}: edge_shift_dir must be 'left' or 'right'")
        layers.append(
            FixedPointLayer(
                weights=weights,
                bias=bias,
                bit_shift=bit_shift,
                clamp_bits=clamp_bits,
                edge_shift=edge_shift,
                edge_shift_dir=edge_dir,
            )
        )
        prev_out = n_out

    metadata = data.get("metadata", {})
    if not isinstance(metadata, dict):
        raise ModelFormatError("metadata must be an object")
    return QuantizedNetwork(
        input_bits=input_bits, weight_bits=weight_bits, layers=layers, metadata=metadata
    )


def network_to_dict(net: QuantizedNetwork) -> dict:
    """Inverse of `network_from_dict` (drops nothing)."""
    layers = []
    for layer in net.layers:
        entry: dict = {
            "weights": [list(r) for r in layer.weights],
            "bias": list(layer.bias),
            "bit_shift": list(layer.bit_shift),
            "clamp_bits": list(layer.clamp_bits),
        }
        if layer.edge_shift is not None:
            entry["edge_shift"] = [list(r) for r in layer.edge_shift]
            entry["edge_shift_dir"] = layer.edge_shift_dir
        layers.append(entry)
    out: dict = {
        "format_version": FORMAT_VERSION,
        "input_bits": net.input_bits,
        "weight_bits": net.weight_bits,
        "layers": layers,
    }
    if net.metadata:
        out["metadata"] = net.metadata
    return out


def load_model(path: str) -> QuantizedNetwork:
    """Load a model JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh, parse_float=_reject_float)
        except ValueError as exc:
            raise ModelFormatError(f"invalid model JSON: {exc}") from exc
    return network_from_dict(data)


def save_model(net: QuantizedNetwork, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network_to_dict(net), fh, indent=1)
        fh.write("\n")


def _reject_float(text: str) -> float:
    raise ModelFormatError(f"model files are integer-only, found float {text}")


def param_count(net: QuantizedNetwork) -> int:
    """Number of trainable parameters (weights plus biases)."""
    return sum(l.n_out * l.n_in + l.n_out for l in net.layers)
