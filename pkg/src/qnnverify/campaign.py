"""Robustness campaigns: schedules, worker pool, reports, ablations, oracle.

A campaign runs one robustness query per (sample index, epsilon) task.
Samples the network misclassifies as-is are skipped (the query presupposes
the label is the network's own prediction on the unperturbed input).
Infrastructure failures are recorded per task and never abort the campaign;
a counterexample failing interpreter replay does abort, because it means the
toolchain itself is inconsistent.
"""

from __future__ import annotations

import csv
import json
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from ._dispatch import FastEvaluator
from .dataset import Sample, load_idx_dataset, quantize_pixels
from .encoder import EncodeOptions, encode_robustness_query
from .errors import CounterexampleMismatchError, QnnVerifyError
from .model import QuantizedNetwork, load_model
from .solver import (
    Outcome,
    SolverConfig,
    Verdict,
    assignment_vector,
    default_solver_config,
    solve_script,
    validate_counterexample,
)

ABLATION_CONFIGS: list[tuple[str, EncodeOptions]] = [
    ("all_on", EncodeOptions(True, True, True)),
    ("no_dead_branch", EncodeOptions(False, True, True)),
    ("no_minimal_bits", EncodeOptions(True, False, True)),
    ("no_redundancy_elim", EncodeOptions(True, True, False)),
    ("baseline", EncodeOptions(False, False, False)),
]


@dataclass(frozen=True)
class ScheduleEntry:
    epsilon: int
    start: int
    count: int


@dataclass
class CampaignSpec:
    model_path: str
    images_path: str
    labels_path: str
    schedule: list[ScheduleEntry]
    options: EncodeOptions = EncodeOptions()
    solver: SolverConfig | None = None
    parallelism: int = 1
    output_prefix: str | None = None

    def __post_init__(self) -> None:
        seen: set[tuple[int, int]] = set()
        for entry in self.schedule:
            if entry.epsilon < 0:
                raise ValueError("epsilon must be non-negative")
            for idx in range(entry.start, entry.start + entry.count):
                if (entry.epsilon, idx) in seen:
                    raise ValueError(f"duplicate task (epsilon={entry.epsilon}, index={idx})")
                seen.add((entry.epsilon, idx))


def campaign_spec_from_file(path: str) -> CampaignSpec:
    base = Path(path).resolve().parent
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)

    def resolve(p: str) -> str:
        q = Path(p)
        return str(q if q.is_absolute() else base / q)

    opts = data.get("options", {})
    solver = None
    if "solver" in data:
        s = data["solver"]
        solver = SolverConfig(
            executable=resolve(s["executable"]),
            extra_args=tuple(s.get("args", [])),
            timeout_secs=float(s.get("timeout_secs", 60.0)),
        )
    return CampaignSpec(
        model_path=resolve(data["model"]),
        images_path=resolve(data["images"]),
        labels_path=resolve(data["labels"]),
        schedule=[
            ScheduleEntry(int(e["epsilon"]), int(e.get("start", 0)), int(e["count"]))
            for e in data.get("schedule", [])
        ],
        options=EncodeOptions(
            dead_branch_removal=bool(opts.get("dead_branch_removal", True)),
            minimal_bits=bool(opts.get("minimal_bits", True)),
            redundancy_elimination=bool(opts.get("redundancy_elimination", True)),
        ),
        solver=solver,
        parallelism=int(data.get("parallelism", 1)),
        output_prefix=resolve(data["output"]) if "output" in data else None,
    )


@dataclass
class ResultRecord:
    index: int
    epsilon: int
    status: str  # sat | unsat | unknown | timeout | skipped | error
    wall_secs: float = 0.0
    encode_secs: float = 0.0
    validated: bool | None = None
    counterexample: list[int] | None = None
    max_width: int | None = None
    ite_count: int | None = None
    mul_count: int | None = None
    detail: str = ""

    def to_row(self) -> dict:
        return {
            "index": self.index,
            "epsilon": self.epsilon,
            "status": self.status,
            "wall_secs": f"{self.wall_secs:.4f}",
            "encode_secs": f"{self.encode_secs:.4f}",
            "validated": "" if self.validated is None else str(self.validated).lower(),
            "counterexample": ""
            if self.counterexample is None
            else " ".join(map(str, self.counterexample)),
            "max_width": "" if self.max_width is None else self.max_width,
            "ite_count": "" if self.ite_count is None else self.ite_count,
            "mul_count": "" if self.mul_count is None else self.mul_count,
            "detail": self.detail,
        }


CSV_FIELDS = list(ResultRecord(0, 0, "unsat").to_row().keys())


def run_query(
    net: QuantizedNetwork,
    x: Sequence[int],
    label: int,
    epsilon: int,
    options: EncodeOptions,
    solver: SolverConfig,
    index: int = 0,
) -> ResultRecord:
    """One encode-solve-validate task (sample already quantized)."""
    started = time.monotonic()
    try:
        script = encode_robustness_query(net, x, label, epsilon, options)
    except QnnVerifyError as exc:
        return ResultRecord(index, epsilon, "error", detail=f"encode: {exc}")
    encode_secs = time.monotonic() - started
    stats = script.stats
    try:
        verdict = solve_script(script, solver)
    except QnnVerifyError as exc:
        return ResultRecord(
            index, epsilon, "error", encode_secs=encode_secs, detail=f"solve: {exc}"
        )
    record = ResultRecord(
        index=index,
        epsilon=epsilon,
        status=verdict.outcome.value,
        wall_secs=verdict.wall_secs,
        encode_secs=encode_secs,
        max_width=stats.get("max_width"),
        ite_count=stats.get("ite_count"),
        mul_count=stats.get("mul_count"),
    )
    if verdict.outcome is Outcome.SAT:
        vector = assignment_vector(verdict.model, script.symbol_map)
        if not validate_counterexample(net, vector, x, label, epsilon):
            raise CounterexampleMismatchError(
                f"encoder/interpreter mismatch on sample {index} (epsilon {epsilon}): "
                f"model {vector} failed replay"
            )
        record.validated = True
        record.counterexample = vector
    return record


def run_campaign(
    spec: CampaignSpec,
    net: QuantizedNetwork | None = None,
    samples: list[Sample] | None = None,
) -> tuple[list[ResultRecord], dict]:
    """Execute every scheduled task; returns (records, summary)."""
    if net is None:
        net = load_model(spec.model_path)
    if samples is None:
        samples = load_idx_dataset(spec.images_path, spec.labels_path)
    solver = spec.solver if spec.solver is not None else default_solver_config()

    tasks: list[tuple[int, int]] = []
    for entry in spec.schedule:
        for idx in range(entry.start, entry.start + entry.count):
            if idx >= len(samples):
                raise ValueError(f"schedule index {idx} beyond dataset size {len(samples)}")
            tasks.append((idx, entry.epsilon))

    evaluator = FastEvaluator(net)

    def work(task: tuple[int, int]) -> ResultRecord:
        idx, eps = task
        sample = samples[idx]
        x = quantize_pixels(sample.pixels, net.input_bits)
        if evaluator.classify(x) != sample.label:
            return ResultRecord(idx, eps, "skipped", detail="misclassified unperturbed")
        return run_query(net, x, sample.label, eps, spec.options, solver, index=idx)

    if spec.parallelism > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=spec.parallelism) as pool:
            records = list(pool.map(work, tasks))
    else:
        records = [work(t) for t in tasks]

    summary = summarize(records, spec.options)
    if spec.output_prefix:
        write_reports(records, summary, spec.output_prefix)
    return records, summary


def summarize(records: list[ResultRecord], options: EncodeOptions) -> dict:
    """Per-epsilon solved counts and runtime stats over solved records."""
    by_eps: dict[int, dict] = {}
    for rec in records:
        bucket = by_eps.setdefault(
            rec.epsilon,
            {"sat": 0, "unsat": 0, "timeout": 0, "unknown": 0, "skipped": 0, "error": 0},
        )
        bucket[rec.status] += 1
    out = {"options": options.as_dict(), "epsilons": {}}
    for eps in sorted(by_eps):
        bucket = by_eps[eps]
        solved_walls = [
            r.wall_secs for r in records if r.epsilon == eps and r.status in ("sat", "unsat")
        ]
        out["epsilons"][str(eps)] = {
            **bucket,
            "solved": bucket["sat"] + bucket["unsat"],
            "attempted": sum(bucket.values()) - bucket["skipped"],
            "median_wall_secs": statistics.median(solved_walls) if solved_walls else None,
            "mean_wall_secs": statistics.fmean(solved_walls) if solved_walls else None,
        }
    out["total_wall_secs"] = sum(r.wall_secs for r in records)
    return out


def write_reports(records: list[ResultRecord], summary: dict, prefix: str) -> None:
    path = Path(prefix)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(f"{prefix}.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for rec in records:
            writer.writerow(rec.to_row())
    with open(f"{prefix}.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1)
        fh.write("\n")


def run_ablation(
    spec: CampaignSpec,
    net: QuantizedNetwork | None = None,
    samples: list[Sample] | None = None,
) -> dict:
    """The five-configuration pass-toggle study over one schedule."""
    table = {}
    for name, options in ABLATION_CONFIGS:
        one = CampaignSpec(
            model_path=spec.model_path,
            images_path=spec.images_path,
            labels_path=spec.labels_path,
            schedule=spec.schedule,
            options=options,
            solver=spec.solver,
            parallelism=spec.parallelism,
            output_prefix=f"{spec.output_prefix}_{name}" if spec.output_prefix else None,
        )
        records, summary = run_campaign(one, net=net, samples=samples)
        solved = sum(1 for r in records if r.status in ("sat", "unsat"))
        table[name] = {
            "solved": solved,
            "attempted": sum(1 for r in records if r.status != "skipped"),
            "total_wall_secs": sum(r.wall_secs for r in records),
            "verdicts": {
                f"{r.index}:{r.epsilon}": r.status for r in records if r.status != "skipped"
            },
            "summary": summary,
        }
    if spec.output_prefix:
        with open(f"{spec.output_prefix}_ablation.json", "w", encoding="utf-8") as fh:
            json.dump(table, fh, indent=1)
            fh.write("\n")
    return table


def brute_force_verify(
    net: QuantizedNetwork,
    sample: Sequence[int],
    label: int,
    epsilon: int,
    cap: int = 1 << 20,
) -> Verdict:
    """Exhaustive ball search; the reference oracle for the whole pipeline."""
    top = (1 << net.input_bits) - 1
    lo = [max(0, v - epsilon) for v in sample]
    hi = [min(top, v + epsilon) for v in sample]
    evaluator = FastEvaluator(net)
    cex = evaluator.find_ball_cex(lo, hi, label, limit=cap)
    if cex is None:
        return Verdict(Outcome.UNSAT)
    model = {f"x{j}": v for j, v in enumerate(cex)}
    return Verdict(Outcome.SAT, model=model, validated=True, counterexample=list(cex))
