"""Synthetic dataset generation and IDX serialization."""

from __future__ import annotations

import struct

import numpy as np
import pytest

from qnnexport.synth import make_dataset, quantize, write_idx


class TestQuantize:
    def test_truncation_rule(self):
        raw = np.arange(256, dtype=np.int64)
        for bits in range(1, 9):
            got = quantize(raw, bits)
            want = raw // (1 << (8 - bits))
            assert np.array_equal(got, want)
            assert got.max() == (1 << bits) - 1

    def test_frozen_example(self):
        assert quantize(np.array([130]), 6).tolist() == [32]

    def test_bits_validation(self):
        with pytest.raises(ValueError, match=r"\[1, 8\]"):
            quantize(np.array([0]), 0)
        with pytest.raises(ValueError, match=r"\[1, 8\]"):
            quantize(np.array([0]), 9)


class TestMakeDataset:
    def test_shapes_and_domain(self):
        ds = make_dataset(20, 4, 100, 40, input_bits=4, seed=3)
        assert ds.raw_train.shape == (100, 20)
        assert ds.raw_test.shape == (40, 20)
        assert ds.raw_train.min() >= 0 and ds.raw_train.max() <= 255
        assert ds.x_train.max() <= 15 and ds.x_train.min() >= 0
        assert set(np.unique(ds.y_train)) <= set(range(4))

    def test_labels_balanced(self):
        ds = make_dataset(10, 5, 100, 50, input_bits=3, seed=1)
        counts = np.bincount(ds.y_train, minlength=5)
        assert counts.tolist() == [20] * 5

    def test_deterministic(self):
        a = make_dataset(15, 3, 60, 30, input_bits=5, seed=9)
        b = make_dataset(15, 3, 60, 30, input_bits=5, seed=9)
        assert np.array_equal(a.raw_train, b.raw_train)
        assert np.array_equal(a.y_test, b.y_test)

    def test_seed_changes_data(self):
        a = make_dataset(15, 3, 60, 30, input_bits=5, seed=9)
        b = make_dataset(15, 3, 60, 30, input_bits=5, seed=10)
        assert not np.array_equal(a.raw_train, b.raw_train)

    def test_classes_separable(self):
        # nearest-prototype distance should recover labels almost always
        ds = make_dataset(50, 4, 200, 50, input_bits=4, seed=2)
        protos = np.stack(
            [ds.raw_train[ds.y_train == c].mean(axis=0) for c in range(4)]
        )
        d = ((ds.raw_test[:, None, :] - protos[None]) ** 2).sum(axis=2)
        acc = (d.argmin(axis=1) == ds.y_test).mean()
        assert acc > 0.9


class TestWriteIdx:
    def test_container_layout(self, tmp_path):
        raw = np.array([[0, 128, 255], [1, 2, 3]], dtype=np.int64)
        labels = np.array([7, 1], dtype=np.int64)
        img, lab = str(tmp_path / "i.idx"), str(tmp_path / "l.idx")
        write_idx(raw, labels, img, lab)

        blob = open(img, "rb").read()
        magic, count, rows, cols = struct.unpack(">IIII", blob[:16])
        assert (magic, count, rows, cols) == (0x00000803, 2, 1, 3)
        assert list(blob[16:]) == [0, 128, 255, 1, 2, 3]

        blob = open(lab, "rb").read()
        magic, count = struct.unpack(">II", blob[:8])
        assert (magic, count) == (0x00000801, 2)
        assert list(blob[8:]) == [7, 1]
