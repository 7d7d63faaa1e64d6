"""Exporter command line: train and export round trips."""

from __future__ import annotations

import json
import struct

from qnnexport.cli import main
from qnnexport.trace import forward_trace


class TestTrain:
    def test_writes_model(self, tmp_path, capsys):
        out = str(tmp_path / "model.json")
        rc = main([
            "train", "--arch", "20,6,3", "--bits", "4", "--seed", "3",
            "--epochs", "3", "--train-samples", "300", "--test-samples", "60",
            "--out", out,
        ])
        assert rc == 0
        doc = json.load(open(out))
        assert doc["input_bits"] == 4
        assert [len(l["weights"]) for l in doc["layers"]] == [6, 3]
        assert "test accuracy" in capsys.readouterr().out

    def test_dataset_export_filters_correct(self, tmp_path):
        out = str(tmp_path / "model.json")
        prefix = str(tmp_path / "ci")
        main([
            "train", "--arch", "20,6,3", "--bits", "4", "--seed", "3",
            "--epochs", "3", "--train-samples", "300", "--test-samples", "60",
            "--out", out, "--dataset-out", prefix, "--dataset-count", "10",
        ])
        doc = json.load(open(out))
        img = open(prefix + "_images.idx", "rb").read()
        lab = open(prefix + "_labels.idx", "rb").read()
        magic, count, rows, cols = struct.unpack(">IIII", img[:16])
        assert (magic, rows, cols) == (0x00000803, 1, 20)
        assert count == struct.unpack(">II", lab[:8])[1] == 10
        # every exported sample is classified correctly after quantization
        shift = 8 - doc["input_bits"]
        for i in range(count):
            pixels = list(img[16 + i * 20 : 16 + (i + 1) * 20])
            x = [p >> shift for p in pixels]
            outputs = forward_trace(doc, x)[-1]["output"]
            assert outputs.index(max(outputs)) == lab[8 + i]


class TestExport:
    def test_traces_round_trip(self, tmp_path):
        model = str(tmp_path / "model.json")
        traces = str(tmp_path / "traces.json")
        main([
            "train", "--arch", "15,5,3", "--bits", "3", "--seed", "1",
            "--epochs", "2", "--train-samples", "200", "--test-samples", "40",
            "--out", model,
        ])
        rc = main(["export", "--model", model, "--traces", "12", "--seed", "4",
                   "--out", traces])
        assert rc == 0
        doc = json.load(open(model))
        bundle = json.load(open(traces))
        assert len(bundle["traces"]) == 12
        assert bundle["metadata"] == doc["metadata"]
        for tr in bundle["traces"]:
            assert tr["layers"] == forward_trace(doc, tr["input"])

    def test_zero_traces_model_only(self, tmp_path, capsys):
        model = str(tmp_path / "model.json")
        main([
            "train", "--arch", "15,5,3", "--bits", "3", "--seed", "1",
            "--epochs", "2", "--train-samples", "200", "--test-samples", "40",
            "--out", model,
        ])
        capsys.readouterr()
        rc = main(["export", "--model", model, "--traces", "0", "--seed", "4",
                   "--out", str(tmp_path / "t.json")])
        assert rc == 0
        assert not (tmp_path / "t.json").exists()
        assert "no traces requested" in capsys.readouterr().out
