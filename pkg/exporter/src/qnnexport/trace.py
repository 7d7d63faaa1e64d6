"""Golden traces: a straight-line integer evaluator plus bundle files.

`forward_trace` is intentionally a from-scratch implementation of the model
semantics over a parsed JSON document — it shares nothing with the verifier,
so agreement between the two is evidence, not tautology. All arithmetic is
unbounded Python integers; the right shift is floor division.
"""

from __future__ import annotations

import json
import random
from typing import Sequence

TRACE_FORMAT_VERSION = 1


def forward_trace(doc: dict, x: Sequence[int]) -> list[dict]:
    """Layer-by-layer forward pass returning every intermediate integer.

    Each entry holds the raw accumulators (`pre_shift`), the values after the
    power-of-two floor division but before clamping (`post_shift`, which may
    be negative), and the clamped activations (`output`).
    """
    vec = list(x)
    out_layers = []
    for t, layer in enumerate(doc["layers"]):
        if "edge_shift" in layer:
            raise ValueError(f"layer {t}: traces support plain layers only")
        pre = []
        for row, b in zip(layer["weights"], layer["bias"]):
            if len(row) != len(vec):
                raise ValueError(f"layer {t}: expected {len(row)} inputs, got {len(vec)}")
            acc = b
            for w, v in zip(row, vec):
                acc += w * v
            pre.append(acc)
        mid = [p // (1 << k) for p, k in zip(pre, layer["bit_shift"])]
        top = [(1 << n) - 1 for n in layer["clamp_bits"]]
        out = [0 if m < 0 else (t_ if m > t_ else m) for m, t_ in zip(mid, top)]
        out_layers.append({"pre_shift": pre, "post_shift": mid, "output": out})
        vec = out
    return out_layers


def predict(doc: dict, x: Sequence[int]) -> int:
    """Class index: argmax of the final activations, lowest index on ties."""
    outputs = forward_trace(doc, x)[-1]["output"]
    return max(range(len(outputs)), key=lambda i: (outputs[i], -i))


def make_traces(doc: dict, n_traces: int, seed: int) -> list[dict]:
    """Traces on uniform random in-domain inputs from a seeded generator."""
    rng = random.Random(seed)
    top = (1 << doc["input_bits"]) - 1
    n_in = len(doc["layers"][0]["weights"][0])
    traces = []
    for _ in range(n_traces):
        x = [rng.randint(0, top) for _ in range(n_in)]
        traces.append({"input": x, "layers": forward_trace(doc, x)})
    return traces


def export_bundle(
    doc: dict,
    model_path: str,
    n_traces: int = 0,
    seed: int = 0,
    traces_path: str | None = None,
    metadata: dict | None = None,
) -> dict | None:
    """Write the model file and, when n_traces > 0, its trace bundle.

    Returns the trace document, or None when only the model was written.
    Writes are byte-deterministic for a given document and seed.
    """
    with open(model_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    if n_traces <= 0:
        return None
    if traces_path is None:
        raise ValueError("traces_path is required when n_traces > 0")
    bundle = {
        "format_version": TRACE_FORMAT_VERSION,
        "model_file": model_path.rsplit("/", 1)[-1],
        "input_bits": doc["input_bits"],
        "seed": seed,
        "metadata": metadata or {},
        "traces": make_traces(doc, n_traces, seed),
    }
    with open(traces_path, "w", encoding="utf-8") as fh:
        json.dump(bundle, fh, indent=1)
        fh.write("\n")
    return bundle
