"""Command-line front end.

Subcommands: verify (single query), campaign (JSON spec), ablate,
reduce (quantified boolean formulas), inspect (interval dump).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .campaign import (
    brute_force_verify,
    campaign_spec_from_file,
    run_ablation,
    run_campaign,
)
from .dataset import load_idx_dataset, quantize_pixels
from .encoder import (
    EncodeOptions,
    accumulator_width_report,
    encode_robustness_query,
)
from .bvterm import emit_smtlib
from .errors import QnnVerifyError
from .intervals import input_intervals_for_ball, propagate_network
from .model import load_model, network_to_dict
from .qbf import brute_force_qbf, parse_qdimacs
from .reduction import (
    build_reduction,
    brute_force_instance,
    encode_instance,
    validate_instance_model,
)
from .solver import Outcome, SolverConfig, default_solver_config, solve_robustness, solve_script


def _add_option_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--no-dead-branch", action="store_true", help="disable dead-branch clamp simplification"
    )
    p.add_argument(
        "--no-min-bits", action="store_true", help="disable minimal bit-width allocation"
    )
    p.add_argument(
        "--no-redundancy-elim",
        action="store_true",
        help="disable redundant-multiplication elimination",
    )
    p.add_argument(
        "--baseline", action="store_true", help="disable all three passes (shorthand)"
    )


def _options_from_args(args: argparse.Namespace) -> EncodeOptions:
    if args.baseline:
        return EncodeOptions(False, False, False)
    return EncodeOptions(
        dead_branch_removal=not args.no_dead_branch,
        minimal_bits=not args.no_min_bits,
        redundancy_elimination=not args.no_redundancy_elim,
    )


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--solver", help="solver executable (default: QNNV_SOLVER or autodetect)")
    p.add_argument(
        "--solver-arg",
        action="append",
        default=[],
        help="extra argument passed to the solver (repeatable)",
    )
    p.add_argument("--timeout-secs", type=float, default=60.0, help="per-query solver timeout")


def _solver_from_args(args: argparse.Namespace) -> SolverConfig:
    if args.solver:
        return SolverConfig(
            executable=args.solver,
            extra_args=tuple(args.solver_arg),
            timeout_secs=args.timeout_secs,
        )
    base = default_solver_config()
    return SolverConfig(
        executable=base.executable,
        extra_args=base.extra_args + tuple(args.solver_arg),
        timeout_secs=args.timeout_secs,
    )


def _load_sample(args: argparse.Namespace, net) -> tuple[list[int], int]:
    """Quantized input vector and label from either --sample/--label or a dataset."""
    if args.sample is not None:
        x = [int(tok) for tok in args.sample.replace(",", " ").split()]
        if args.label is None:
            raise QnnVerifyError("--label is required with --sample")
        return x, args.label
    if args.images is None or args.labels is None or args.index is None:
        raise QnnVerifyError("provide either --sample/--label or --images/--labels/--index")
    samples = load_idx_dataset(args.images, args.labels)
    if not (0 <= args.index < len(samples)):
        raise QnnVerifyError(f"index {args.index} out of range for {len(samples)} samples")
    sample = samples[args.index]
    label = sample.label if args.label is None else args.label
    return quantize_pixels(sample.pixels, net.input_bits), label


def cmd_verify(args: argparse.Namespace) -> int:
    net = load_model(args.model)
    x, label = _load_sample(args, net)
    opts = _options_from_args(args)

    if args.emit_only:
        script = encode_robustness_query(net, x, label, args.epsilon, opts)
        text = emit_smtlib(script)
        if args.output:
            Path(args.output).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
        return 0

    if args.brute_force:
        verdict = brute_force_verify(net, x, label, args.epsilon)
    else:
        verdict = solve_robustness(net, x, label, args.epsilon, opts, _solver_from_args(args))

    print(f"verdict: {verdict.outcome.value}")
    if verdict.outcome is Outcome.SAT:
        print(f"counterexample: {' '.join(map(str, verdict.counterexample))}")
        print(f"validated: {verdict.validated}")
    return 0 if verdict.outcome in (Outcome.SAT, Outcome.UNSAT) else 2


def cmd_campaign(args: argparse.Namespace) -> int:
    spec = campaign_spec_from_file(args.spec)
    if args.output:
        spec.output_prefix = args.output
    _, summary = run_campaign(spec)
    print(json.dumps(summary, indent=1))
    if spec.output_prefix:
        print(f"reports written to {spec.output_prefix}.csv / .json", file=sys.stderr)
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    spec = campaign_spec_from_file(args.spec)
    if args.output:
        spec.output_prefix = args.output
    table = run_ablation(spec)
    widths = max(len(name) for name in table)
    print(f"{'configuration':<{widths}}  solved  attempted  total_wall_secs")
    for name, row in table.items():
        print(
            f"{name:<{widths}}  {row['solved']:>6}  {row['attempted']:>9}"
            f"  {row['total_wall_secs']:>15.3f}"
        )
    return 0


def cmd_reduce(args: argparse.Namespace) -> int:
    with open(args.qdimacs, "r", encoding="utf-8") as fh:
        qbf = parse_qdimacs(fh.read())
    inst = build_reduction(qbf)

    ran_anything = False
    if args.oracle:
        ran_anything = True
        qbf_truth = brute_force_qbf(qbf)
        inst_truth = brute_force_instance(inst)
        print(f"qbf oracle: {'true' if qbf_truth else 'false'}")
        print(f"instance oracle: {'true' if inst_truth else 'false'}")
        if qbf_truth != inst_truth:
            print("oracle disagreement", file=sys.stderr)
            return 1
    if args.dump_instance:
        ran_anything = True
        payload = {
            "word_bits": inst.word_bits,
            "universals": inst.universals,
            "block_exponents": list(inst.block_exponents),
            "gadgets": [network_to_dict(g) for g in inst.gadgets],
            "g": network_to_dict(inst.g),
        }
        json.dump(payload, sys.stdout, indent=1)
        sys.stdout.write("\n")
    if args.dump_smt:
        ran_anything = True
        text = emit_smtlib(encode_instance(inst, _options_from_args(args)))
        if args.output:
            Path(args.output).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    if args.solve:
        ran_anything = True
        script = encode_instance(inst, _options_from_args(args))
        verdict = solve_script(script, _solver_from_args(args))
        print(f"solver: {verdict.outcome.value}")
        if verdict.outcome is Outcome.SAT:
            ok = validate_instance_model(inst, verdict.model)
            print(f"model validated: {ok}")
            if not ok:
                return 1
        return 0 if verdict.outcome in (Outcome.SAT, Outcome.UNSAT) else 2
    if not ran_anything:
        print("nothing to do: pass --oracle, --solve, --dump-instance, or --dump-smt",
              file=sys.stderr)
        return 1
    return 0


def cmd_inspect(args: argparse.Namespace) -> int:
    net = load_model(args.model)
    if args.sample is not None:
        x = [int(tok) for tok in args.sample.replace(",", " ").split()]
        box = input_intervals_for_ball(x, args.epsilon, net.input_bits)
    else:
        from .intervals import full_input_box

        box = full_input_box(net)
    imap = propagate_network(net, box)
    payload = imap.to_json_dict()
    if args.widths:
        payload["accumulator_widths"] = accumulator_width_report(net, box)
    json.dump(payload, sys.stdout, indent=1)
    sys.stdout.write("\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qnnverify",
        description="Bit-exact robustness verification for fixed-point neural networks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="verify one robustness query")
    p.add_argument("model", help="model JSON file")
    p.add_argument("--sample", help="space/comma separated quantized input values")
    p.add_argument("--label", type=int, help="expected class index")
    p.add_argument("--images", help="IDX image file")
    p.add_argument("--labels", help="IDX label file")
    p.add_argument("--index", type=int, help="sample index within the dataset")
    p.add_argument("--epsilon", type=int, required=True, help="attack radius")
    p.add_argument("--emit-only", action="store_true", help="print the SMT-LIB script and exit")
    p.add_argument("--brute-force", action="store_true", help="use ball enumeration, no solver")
    p.add_argument("--output", help="write the script here instead of stdout (with --emit-only)")
    _add_option_flags(p)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("campaign", help="run a scheduled robustness campaign")
    p.add_argument("--spec", required=True, help="campaign spec JSON file")
    p.add_argument("--output", help="report path prefix (.csv/.json appended)")
    p.set_defaults(func=cmd_campaign)

    p = sub.add_parser("ablate", help="run the five-configuration pass ablation")
    p.add_argument("--spec", required=True, help="campaign spec JSON file")
    p.add_argument("--output", help="report path prefix")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("reduce", help="compile a quantified boolean formula to a network query")
    p.add_argument("qdimacs", help="QDIMACS file")
    p.add_argument("--oracle", action="store_true", help="run both brute-force oracles")
    p.add_argument("--solve", action="store_true", help="solve the encoded instance")
    p.add_argument("--dump-instance", action="store_true", help="print gadget networks as JSON")
    p.add_argument("--dump-smt", action="store_true", help="print the SMT-LIB script")
    p.add_argument("--output", help="write --dump-smt output here")
    _add_option_flags(p)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("inspect", help="dump exact interval analysis as JSON")
    p.add_argument("model", help="model JSON file")
    p.add_argument("--sample", help="center the box on this input (else full domain)")
    p.add_argument("--epsilon", type=int, default=0, help="ball radius around --sample")
    p.add_argument("--widths", action="store_true", help="include naive/minimal width report")
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except QnnVerifyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
