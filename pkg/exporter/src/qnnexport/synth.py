"""Synthetic image classification data with the deployment quantization rule.

Samples are noisy copies of per-class prototype images in the raw 8-bit pixel
domain. Network inputs use the same rule the verification harness applies to
raw pixels: drop the low (8 - input_bits) bits.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np


@dataclass
class Dataset:
    """Raw pixels stay in [0, 255]; `quantized` is the network input domain."""

    raw_train: np.ndarray  # (n_train, n_inputs) int64 in [0, 255]
    y_train: np.ndarray  # (n_train,) int64 class labels
    raw_test: np.ndarray
    y_test: np.ndarray
    input_bits: int

    @property
    def x_train(self) -> np.ndarray:
        return quantize(self.raw_train, self.input_bits)

    @property
    def x_test(self) -> np.ndarray:
        return quantize(self.raw_test, self.input_bits)


def quantize(raw: np.ndarray, input_bits: int) -> np.ndarray:
    """Truncate 8-bit pixels onto `input_bits` bits (identical to the harness)."""
    if not (1 <= input_bits <= 8):
        raise ValueError(f"input_bits must be in [1, 8], got {input_bits}")
    return raw >> (8 - input_bits)


def make_dataset(
    n_inputs: int,
    n_classes: int,
    n_train: int,
    n_test: int,
    input_bits: int,
    seed: int,
    noise_sigma: float = 40.0,
) -> Dataset:
    """Class prototypes plus Gaussian pixel noise, clipped back into [0, 255]."""
    rng = np.random.default_rng(seed)
    protos = rng.integers(0, 256, size=(n_classes, n_inputs), dtype=np.int64)

    def draw(n: int) -> tuple[np.ndarray, np.ndarray]:
        labels = np.arange(n, dtype=np.int64) % n_classes
        rng.shuffle(labels)
        noise = rng.normal(0.0, noise_sigma, size=(n, n_inputs))
        raw = np.clip(np.rint(protos[labels] + noise), 0, 255).astype(np.int64)
        return raw, labels

    raw_train, y_train = draw(n_train)
    raw_test, y_test = draw(n_test)
    return Dataset(raw_train, y_train, raw_test, y_test, input_bits)


def write_idx(raw: np.ndarray, labels: np.ndarray, images_path: str, labels_path: str) -> None:
    """Write raw 8-bit pixel rows and labels in the IDX container layout.

    Rows are stored as (1 x n_inputs) images; the harness only consumes the
    flattened pixel vector, so the nominal geometry is irrelevant.
    """
    n, width = raw.shape
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", 0x00000803, n, 1, width))
        fh.write(raw.astype(np.uint8).tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", 0x00000801, n))
        fh.write(labels.astype(np.uint8).tobytes())
