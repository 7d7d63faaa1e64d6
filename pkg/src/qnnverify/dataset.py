"""IDX dataset ingestion and pixel quantization."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence

from .errors import DatasetFormatError

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


@dataclass(frozen=True)
class Sample:
    """One labeled image, pixels still in the raw 0..255 domain."""

    pixels: tuple[int, ...]
    label: int


def _read_file(path: str) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def load_idx_dataset(images_path: str, labels_path: str) -> list[Sample]:
    """Load IDX image/label files (the MNIST container format)."""
    img = _read_file(images_path)
    if len(img) < 16:
        raise DatasetFormatError(f"{images_path}: expected at least 16 bytes, found {len(img)}")
    magic, count, rows, cols = struct.unpack(">IIII", img[:16])
    if magic != IMAGE_MAGIC:
        raise DatasetFormatError(f"{images_path}: bad magic 0x{magic:08x}")
    expected = 16 + count * rows * cols
    if len(img) != expected:
        raise DatasetFormatError(
            f"{images_path}: expected {expected} bytes, found {len(img)}"
        )

    lab = _read_file(labels_path)
    if len(lab) < 8:
        raise DatasetFormatError(f"{labels_path}: expected at least 8 bytes, found {len(lab)}")
    lmagic, lcount = struct.unpack(">II", lab[:8])
    if lmagic != LABEL_MAGIC:
        raise DatasetFormatError(f"{labels_path}: bad magic 0x{lmagic:08x}")
    if len(lab) != 8 + lcount:
        raise DatasetFormatError(f"{labels_path}: expected {8 + lcount} bytes, found {len(lab)}")
    if count != lcount:
        raise DatasetFormatError(f"image count {count} != label count {lcount}")

    size = rows * cols
    samples = []
    for i in range(count):
        start = 16 + i * size
        pixels = tuple(img[start : start + size])
        samples.append(Sample(pixels=pixels, label=lab[8 + i]))
    return samples


def quantize_pixels(pixels: Sequence[int], input_bits: int) -> list[int]:
    """Map 8-bit pixels onto the network input domain by dropping low bits."""
    if not (1 <= input_bits <= 8):
        raise ValueError(f"input_bits must be in [1, 8], got {input_bits}")
    shift = 8 - input_bits
    out = []
    for p in pixels:
        if not (0 <= p <= 255):
            raise ValueError(f"pixel {p} outside [0, 255]")
        out.append(p >> shift)
    return out
