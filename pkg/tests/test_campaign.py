"""Campaign orchestration: schedules, reports, ablation table, oracle."""

from __future__ import annotations

import csv
import json
import struct

import pytest

from qnnverify import campaign as campaign_mod
from qnnverify.campaign import (
    ABLATION_CONFIGS,
    CSV_FIELDS,
    CampaignSpec,
    ScheduleEntry,
    brute_force_verify,
    campaign_spec_from_file,
    run_ablation,
    run_campaign,
    run_query,
)
from qnnverify.dataset import Sample
from qnnverify.encoder import ALL_ON, EncodeOptions
from qnnverify.errors import CounterexampleMismatchError
from qnnverify.model import save_model
from qnnverify.solver import Outcome, SolverConfig

# micro network truth table (input_bits=2): x -> (x, clamp(2x, 3)) -> class
# 0 -> (0,0) -> 0   1 -> (1,2) -> 1   2 -> (2,3) -> 1   3 -> (3,3) -> 0
MICRO_SAMPLES = [
    Sample(pixels=(64,), label=1),  # quantizes to x=1, correctly classified
    Sample(pixels=(0,), label=0),  # x=0, correctly classified
    Sample(pixels=(64,), label=0),  # x=1 but labeled 0: misclassified
]


def micro_spec(**overrides) -> CampaignSpec:
    kwargs = dict(
        model_path="unused",
        images_path="unused",
        labels_path="unused",
        schedule=[ScheduleEntry(epsilon=1, start=0, count=3), ScheduleEntry(0, 0, 1)],
    )
    kwargs.update(overrides)
    return CampaignSpec(**kwargs)


def write_micro_dataset(dirpath) -> tuple[str, str]:
    img = dirpath / "images.idx"
    lab = dirpath / "labels.idx"
    body = b"".join(bytes(s.pixels) for s in MICRO_SAMPLES)
    img.write_bytes(struct.pack(">IIII", 0x00000803, len(MICRO_SAMPLES), 1, 1) + body)
    lab.write_bytes(
        struct.pack(">II", 0x00000801, len(MICRO_SAMPLES))
        + bytes(s.label for s in MICRO_SAMPLES)
    )
    return str(img), str(lab)


class TestSpec:
    def test_duplicate_task_rejected(self):
        with pytest.raises(ValueError, match=r"duplicate task \(epsilon=1, index=2\)"):
            micro_spec(schedule=[ScheduleEntry(1, 0, 3), ScheduleEntry(1, 2, 1)])

    def test_same_index_different_epsilon_ok(self):
        micro_spec(schedule=[ScheduleEntry(1, 0, 2), ScheduleEntry(2, 0, 2)])

    def test_negative_epsilon_rejected(self):
        with pytest.raises(ValueError, match="non-negative"):
            micro_spec(schedule=[ScheduleEntry(-1, 0, 1)])

    def test_spec_from_file_resolves_relative_paths(self, tmp_path, micro_net):
        save_model(micro_net, str(tmp_path / "net.json"))
        write_micro_dataset(tmp_path)
        (tmp_path / "bin").mkdir()
        (tmp_path / "bin" / "solver").write_text("#!/bin/sh\n")
        doc = {
            "model": "net.json",
            "images": "images.idx",
            "labels": "labels.idx",
            "schedule": [{"epsilon": 1, "count": 2}, {"epsilon": 0, "start": 1, "count": 1}],
            "options": {"dead_branch_removal": False},
            "solver": {"executable": "bin/solver", "args": ["-q"], "timeout_secs": 5},
            "parallelism": 3,
            "output": "out/report",
        }
        spec_path = tmp_path / "campaign.json"
        spec_path.write_text(json.dumps(doc))

        spec = campaign_spec_from_file(str(spec_path))
        assert spec.model_path == str(tmp_path / "net.json")
        assert spec.images_path == str(tmp_path / "images.idx")
        assert spec.labels_path == str(tmp_path / "labels.idx")
        assert spec.schedule == [ScheduleEntry(1, 0, 2), ScheduleEntry(0, 1, 1)]
        assert spec.options == EncodeOptions(False, True, True)
        assert spec.solver == SolverConfig(
            executable=str(tmp_path / "bin" / "solver"), extra_args=("-q",), timeout_secs=5.0
        )
        assert spec.parallelism == 3
        assert spec.output_prefix == str(tmp_path / "out" / "report")

    def test_spec_from_file_defaults(self, tmp_path):
        doc = {"model": "m.json", "images": "i.idx", "labels": "l.idx"}
        p = tmp_path / "c.json"
        p.write_text(json.dumps(doc))
        spec = campaign_spec_from_file(str(p))
        assert spec.schedule == []
        assert spec.options == ALL_ON
        assert spec.solver is None
        assert spec.parallelism == 1
        assert spec.output_prefix is None


class TestBruteForceVerify:
    def test_micro_sat(self, micro_net):
        verdict = brute_force_verify(micro_net, [1], 1, 1)
        assert verdict.outcome is Outcome.SAT
        assert verdict.counterexample == [0]
        assert verdict.validated is True
        assert verdict.model == {"x0": 0}

    def test_micro_unsat_at_zero_radius(self, micro_net):
        verdict = brute_force_verify(micro_net, [1], 1, 0)
        assert verdict.outcome is Outcome.UNSAT
        assert verdict.model is None

    def test_ball_clipped_to_domain(self, micro_net):
        # epsilon larger than the whole domain is fine: ball is clipped
        verdict = brute_force_verify(micro_net, [0], 0, 99)
        assert verdict.outcome is Outcome.SAT

    def test_cap_enforced(self, micro_net):
        with pytest.raises(OverflowError, match="point limit"):
            brute_force_verify(micro_net, [1], 1, 3, cap=3)


class TestRunQuery:
    def test_sat_record(self, micro_net, solver_config):
        rec = run_query(micro_net, [1], 1, 1, ALL_ON, solver_config, index=7)
        assert rec.index == 7
        assert rec.epsilon == 1
        assert rec.status == "sat"
        assert rec.validated is True
        assert rec.counterexample == [0]
        assert rec.max_width is not None and rec.max_width >= 1
        assert rec.ite_count is not None
        assert rec.mul_count is not None
        assert rec.wall_secs > 0
        assert rec.encode_secs >= 0

    def test_unsat_record(self, micro_net, solver_config):
        rec = run_query(micro_net, [1], 1, 0, ALL_ON, solver_config)
        assert rec.status == "unsat"
        assert rec.validated is None
        assert rec.counterexample is None

    def test_encode_failure_is_error_status(self, micro_net, solver_config):
        rec = run_query(micro_net, [1], 5, 1, ALL_ON, solver_config)
        assert rec.status == "error"
        assert rec.detail.startswith("encode:")

    def test_solver_failure_is_error_status(self, micro_net):
        bad = SolverConfig(executable="/nonexistent/solver-binary")
        rec = run_query(micro_net, [1], 1, 1, ALL_ON, bad)
        assert rec.status == "error"
        assert rec.detail.startswith("solve:")

    def test_replay_mismatch_aborts(self, micro_net, solver_config, monkeypatch):
        monkeypatch.setattr(campaign_mod, "validate_counterexample", lambda *a: False)
        with pytest.raises(CounterexampleMismatchError, match="mismatch on sample 0"):
            run_query(micro_net, [1], 1, 1, ALL_ON, solver_config)


class TestRunCampaign:
    def expected_statuses(self):
        return {(0, 1): "sat", (1, 1): "sat", (2, 1): "skipped", (0, 0): "unsat"}

    def test_verdicts_and_summary(self, micro_net, solver_config):
        spec = micro_spec(solver=solver_config)
        records, summary = run_campaign(spec, net=micro_net, samples=MICRO_SAMPLES)
        got = {(r.index, r.epsilon): r.status for r in records}
        assert got == self.expected_statuses()
        skipped = next(r for r in records if r.status == "skipped")
        assert skipped.detail == "misclassified unperturbed"
        sats = [r for r in records if r.status == "sat"]
        assert all(r.validated for r in sats)

        eps1 = summary["epsilons"]["1"]
        assert eps1["sat"] == 2 and eps1["skipped"] == 1
        assert eps1["solved"] == 2 and eps1["attempted"] == 2
        assert eps1["median_wall_secs"] is not None
        eps0 = summary["epsilons"]["0"]
        assert eps0["unsat"] == 1 and eps0["solved"] == 1
        assert summary["total_wall_secs"] > 0
        assert summary["options"] == ALL_ON.as_dict()

    def test_parallel_matches_serial(self, micro_net, solver_config):
        spec = micro_spec(solver=solver_config, parallelism=3)
        records, _ = run_campaign(spec, net=micro_net, samples=MICRO_SAMPLES)
        got = {(r.index, r.epsilon): r.status for r in records}
        assert got == self.expected_statuses()
        # task order in the report is the schedule order regardless of pool
        assert [(r.index, r.epsilon) for r in records] == [(0, 1), (1, 1), (2, 1), (0, 0)]

    def test_schedule_beyond_dataset(self, micro_net, solver_config):
        spec = micro_spec(schedule=[ScheduleEntry(1, 2, 2)], solver=solver_config)
        with pytest.raises(ValueError, match="beyond dataset size 3"):
            run_campaign(spec, net=micro_net, samples=MICRO_SAMPLES)

    def test_crash_isolation(self, micro_net):
        bad = SolverConfig(executable="/nonexistent/solver-binary")
        spec = micro_spec(solver=bad)
        records, summary = run_campaign(spec, net=micro_net, samples=MICRO_SAMPLES)
        statuses = {(r.index, r.epsilon): r.status for r in records}
        assert statuses == {(0, 1): "error", (1, 1): "error", (2, 1): "skipped", (0, 0): "error"}
        assert summary["epsilons"]["1"]["error"] == 2
        assert summary["epsilons"]["1"]["solved"] == 0

    def test_reports_written(self, micro_net, solver_config, tmp_path):
        prefix = str(tmp_path / "nested" / "report")
        spec = micro_spec(solver=solver_config, output_prefix=prefix)
        records, summary = run_campaign(spec, net=micro_net, samples=MICRO_SAMPLES)

        with open(prefix + ".csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == len(records) == 4
        assert list(rows[0].keys()) == CSV_FIELDS
        sat_row = next(r for r in rows if r["status"] == "sat" and r["index"] == "0")
        assert sat_row["validated"] == "true"
        assert sat_row["counterexample"] == "0"
        skipped_row = next(r for r in rows if r["status"] == "skipped")
        assert skipped_row["validated"] == ""
        assert skipped_row["max_width"] == ""

        with open(prefix + ".json") as fh:
            assert json.load(fh) == json.loads(json.dumps(summary))

    def test_loads_model_and_dataset_from_files(self, micro_net, solver_config, tmp_path):
        model_path = tmp_path / "net.json"
        save_model(micro_net, str(model_path))
        images, labels = write_micro_dataset(tmp_path)
        spec = CampaignSpec(
            model_path=str(model_path),
            images_path=images,
            labels_path=labels,
            schedule=[ScheduleEntry(1, 0, 1)],
            solver=solver_config,
        )
        records, _ = run_campaign(spec)
        assert [r.status for r in records] == ["sat"]
        assert records[0].counterexample == [0]

    def test_deterministic_across_runs(self, micro_net, solver_config):
        spec = micro_spec(solver=solver_config)
        first, _ = run_campaign(spec, net=micro_net, samples=MICRO_SAMPLES)
        second, _ = run_campaign(spec, net=micro_net, samples=MICRO_SAMPLES)
        key = lambda recs: [(r.index, r.epsilon, r.status, r.counterexample) for r in recs]
        assert key(first) == key(second)


class TestAblation:
    def test_five_rows_same_verdicts(self, micro_net, solver_config, tmp_path):
        prefix = str(tmp_path / "abl")
        spec = micro_spec(
            schedule=[ScheduleEntry(1, 0, 2), ScheduleEntry(0, 0, 1)],
            solver=solver_config,
            output_prefix=prefix,
        )
        table = run_ablation(spec, net=micro_net, samples=MICRO_SAMPLES)
        assert list(table.keys()) == [name for name, _ in ABLATION_CONFIGS]
        assert list(table.keys())[-1] == "baseline"
        verdict_sets = [row["verdicts"] for row in table.values()]
        assert all(v == verdict_sets[0] for v in verdict_sets)
        assert verdict_sets[0] == {"0:1": "sat", "1:1": "sat", "0:0": "unsat"}
        for row in table.values():
            assert row["solved"] == 3 and row["attempted"] == 3

        with open(prefix + "_ablation.json") as fh:
            on_disk = json.load(fh)
        assert set(on_disk) == set(table)
        # per-config campaign reports were written too
        for name, _ in ABLATION_CONFIGS:
            assert (tmp_path / f"abl_{name}.csv").exists()
