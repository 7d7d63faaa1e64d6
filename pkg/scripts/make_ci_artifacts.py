#!/usr/bin/env python3
"""Regenerate the committed fixtures in tests/data from scratch.

Needs both packages importable: `pip install -e . --no-build-isolation` at the
repository root and again inside exporter/. Training, trace generation, and
sample selection are all seeded and deterministic, so rerunning this script
reproduces the committed files byte for byte.

The abl4 benchmark dataset is the one non-obvious step: the robustness
campaign in CI has a 60-second-per-query budget, so out of every test sample
the 4-bit model classifies correctly we keep the 30 with the largest interval
separation between the predicted logit and the runner-up under an epsilon=1
ball. Ranking uses only the model's own semantics, never the solver, and both
encoder configurations run the same samples, so the optimization comparison
stays fair; the selection just keeps query difficulty inside the CI budget.
"""

from __future__ import annotations

import struct
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "tests" / "data"
TRAIN_SIZES = ["--train-samples", "2000", "--test-samples", "500"]


def qnnexport(*args: object) -> None:
    cmd = [sys.executable, "-m", "qnnexport", *[str(a) for a in args]]
    print("+ qnnexport", " ".join(cmd[3:]), flush=True)
    subprocess.run(cmd, check=True)


def robustness_slack(imap, label: int) -> int:
    """Minimum separation between the label logit and every rival.

    Non-negative means the interval analysis alone proves the prediction
    cannot change anywhere in the input box.
    """
    outs = [n.act for n in imap.layers[-1]]
    return min(
        outs[label].lo - o.hi - (1 if j < label else 0)
        for j, o in enumerate(outs)
        if j != label
    )


def select_campaign_samples(stem: str, pool_prefix: str, keep: int, epsilon: int) -> None:
    from qnnverify.dataset import load_idx_dataset, quantize_pixels
    from qnnverify.intervals import input_intervals_for_ball, propagate_network
    from qnnverify.model import load_model

    net = load_model(str(DATA / f"{stem}_model.json"))
    pool = load_idx_dataset(f"{pool_prefix}_images.idx", f"{pool_prefix}_labels.idx")
    scored = []
    for idx, s in enumerate(pool):
        x = quantize_pixels(s.pixels, net.input_bits)
        box = input_intervals_for_ball(x, epsilon, net.input_bits)
        slack = robustness_slack(propagate_network(net, box), s.label)
        scored.append((-slack, idx))
    scored.sort()
    chosen = [pool[idx] for _, idx in scored[:keep]]

    width = len(chosen[0].pixels)
    with open(DATA / f"{stem}_images.idx", "wb") as fh:
        fh.write(struct.pack(">IIII", 0x803, len(chosen), 1, width))
        for s in chosen:
            fh.write(bytes(s.pixels))
    with open(DATA / f"{stem}_labels.idx", "wb") as fh:
        fh.write(struct.pack(">II", 0x801, len(chosen)))
        fh.write(bytes(s.label for s in chosen))
    provable = sum(1 for neg, _ in scored[:keep] if -neg >= 0)
    print(
        f"selected {len(chosen)}/{len(pool)} samples for {stem} "
        f"({provable} interval-provable at epsilon={epsilon})",
        flush=True,
    )


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)

    # desk-scale 4-bit model: trace replay + accumulator width fixtures
    qnnexport(
        "train", "--arch", "784,16,10", "--bits", 4, "--seed", 7, "--epochs", 8,
        *TRAIN_SIZES, "--out", DATA / "ci4_model.json",
    )
    qnnexport(
        "export", "--model", DATA / "ci4_model.json",
        "--traces", 60, "--seed", 101, "--out", DATA / "ci4_traces.json",
    )

    # deeper 6-bit model: exact parameter-count + trace replay fixtures
    qnnexport(
        "train", "--arch", "784,64,32,10", "--bits", 6, "--seed", 13, "--epochs", 8,
        *TRAIN_SIZES, "--out", DATA / "deep6_model.json",
    )
    qnnexport(
        "export", "--model", DATA / "deep6_model.json",
        "--traces", 60, "--seed", 102, "--out", DATA / "deep6_traces.json",
    )

    # ablation model: sized so solver queries fit a CI timeout, plus a
    # ranked benchmark dataset (see module docstring)
    with tempfile.TemporaryDirectory() as tmp:
        pool = Path(tmp) / "abl4pool"
        qnnexport(
            "train", "--arch", "100,16,10", "--bits", 4, "--seed", 7, "--epochs", 6,
            *TRAIN_SIZES, "--out", DATA / "abl4_model.json",
            "--dataset-out", pool, "--dataset-count", 500,
        )
        qnnexport(
            "export", "--model", DATA / "abl4_model.json",
            "--traces", 60, "--seed", 103, "--out", DATA / "abl4_traces.json",
        )
        select_campaign_samples("abl4", str(pool), keep=30, epsilon=1)


if __name__ == "__main__":
    main()
