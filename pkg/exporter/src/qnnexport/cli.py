"""Command line for training and exporting trace bundles.

    qnnexport train --arch 784,16,10 --bits 4 --seed 7 --out model.json
    qnnexport export --model model.json --traces 50 --seed 11 --out traces.json
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .qat import train_qat
from .synth import make_dataset, quantize, write_idx
from .trace import export_bundle, predict


def _parse_arch(text: str) -> tuple[int, ...]:
    try:
        arch = tuple(int(p) for p in text.replace(",", " ").split())
    except ValueError:
        raise SystemExit(f"bad --arch {text!r}: expected comma-separated sizes")
    if len(arch) < 2:
        raise SystemExit("--arch needs at least two sizes")
    return arch


def cmd_train(args: argparse.Namespace) -> int:
    arch = _parse_arch(args.arch)
    dataset = make_dataset(
        n_inputs=arch[0],
        n_classes=arch[-1],
        n_train=args.train_samples,
        n_test=args.test_samples,
        input_bits=args.bits,
        seed=args.seed,
    )
    result = train_qat(arch, dataset, args.bits, args.seed, epochs=args.epochs)
    export_bundle(result.doc, args.out)
    status = "diverged" if result.diverged else "ok"
    print(f"trained {args.arch} at {args.bits} bits: {status}, "
          f"test accuracy {result.accuracy:.1%} -> {args.out}")

    if args.dataset_out:
        # keep only test samples the integer network classifies correctly,
        # so robustness campaigns on this file attempt every sample
        raw, labels = dataset.raw_test, dataset.y_test
        keep = []
        for i in range(len(raw)):
            if len(keep) == args.dataset_count:
                break
            if predict(result.doc, quantize(raw[i], args.bits).tolist()) == labels[i]:
                keep.append(i)
        if len(keep) < args.dataset_count:
            print(f"warning: only {len(keep)} correctly-classified samples available")
        sel = np.asarray(keep, dtype=np.int64)
        write_idx(
            raw[sel],
            labels[sel],
            f"{args.dataset_out}_images.idx",
            f"{args.dataset_out}_labels.idx",
        )
        print(f"wrote {len(keep)} samples -> {args.dataset_out}_{{images,labels}}.idx")
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    with open(args.model, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    metadata = dict(doc.get("metadata", {}))
    bundle = export_bundle(
        doc,
        args.model,
        n_traces=args.traces,
        seed=args.seed,
        traces_path=args.out,
        metadata=metadata,
    )
    if bundle is None:
        print(f"no traces requested; model left at {args.model}")
    else:
        print(f"wrote {args.traces} traces -> {args.out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="qnnexport", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a quantized network on synthetic data")
    p_train.add_argument("--arch", required=True, help="layer sizes, e.g. 784,16,10")
    p_train.add_argument("--bits", type=int, required=True, help="quantization bits [2, 8]")
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--epochs", type=int, default=8)
    p_train.add_argument("--train-samples", type=int, default=2000)
    p_train.add_argument("--test-samples", type=int, default=500)
    p_train.add_argument("--out", required=True, help="model JSON path")
    p_train.add_argument(
        "--dataset-out", help="also write <prefix>_images.idx / <prefix>_labels.idx"
    )
    p_train.add_argument("--dataset-count", type=int, default=50)
    p_train.set_defaults(func=cmd_train)

    p_export = sub.add_parser("export", help="emit a golden trace bundle for a model")
    p_export.add_argument("--model", required=True, help="model JSON path")
    p_export.add_argument("--traces", type=int, default=50)
    p_export.add_argument("--seed", type=int, default=0)
    p_export.add_argument("--out", required=True, help="trace JSON path")
    p_export.set_defaults(func=cmd_export)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
