"""
IDX (MNIST) reader and writer.

Layout, all integers big-endian:
  images: magic 0x00000803, count, rows, cols, then count*rows*cols unsigned bytes
  labels: magic 0x00000801, count, then count unsigned bytes
Files ending in ".gz" are transparently (de)compressed.
"""

import gzip
import logging
import struct
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from ..errors import DatasetFormatError
from ..utils import atomic_write_bytes
from .datasets import Dataset

logger = logging.getLogger(__name__)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

PathLike = Union[str, Path]


def _read_bytes(path: PathLike) -> bytes:
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as f:
            return f.read()
    return path.read_bytes()


def _parse(raw: bytes, magic: int, ndim: int, path: PathLike) -> Tuple[Tuple[int, ...], bytes]:
    header_size = 4 * (1 + ndim)
    if len(raw) < 4:
        raise DatasetFormatError(f"{path}: truncated (no header)")
    found = struct.unpack(">I", raw[:4])[0]
    if found != magic:
        raise DatasetFormatError(f"{path}: bad magic 0x{found:08X}, expected 0x{magic:08X}")
    if len(raw) < header_size:
        raise DatasetFormatError(f"{path}: truncated header")
    dims = struct.unpack(f">{ndim}I", raw[4:header_size])
    expected = int(np.prod(dims))
    payload = raw[header_size:]
    if len(payload) < expected:
        raise DatasetFormatError(f"{path}: truncated payload ({len(payload)} of {expected} bytes)")
    return dims, payload[:expected]


def load_idx(images_path: PathLike, labels_path: PathLike, num_classes: int = 10) -> Dataset:
    """Load an image/label IDX pair; pixels are scaled by 1/255 into [0, 1]"""
    (n, rows, cols), pixels = _parse(_read_bytes(images_path), IMAGES_MAGIC, 3, images_path)
    (n_labels,), label_bytes = _parse(_read_bytes(labels_path), LABELS_MAGIC, 1, labels_path)
    if n != n_labels:
        raise DatasetFormatError(f"count mismatch: {n} images in {images_path}, {n_labels} labels in {labels_path}")

    inputs = np.frombuffer(pixels, dtype=np.uint8).reshape(n, rows, cols).astype(np.float64) / 255.0
    labels = np.frombuffer(label_bytes, dtype=np.uint8).astype(np.int64)
    if n and labels.max() >= num_classes:
        raise DatasetFormatError(f"{labels_path}: label {labels.max()} outside [0, {num_classes})")
    logger.info(f"Loaded {n} samples of {rows}x{cols} from {images_path}")
    return Dataset(inputs, labels, num_classes)


def _encode(magic: int, dims: Tuple[int, ...], payload: bytes, path: Path) -> bytes:
    raw = struct.pack(f">I{len(dims)}I", magic, *dims) + payload
    return gzip.compress(raw, mtime=0) if path.suffix == ".gz" else raw


def write_idx(dataset: Dataset, images_path: PathLike, labels_path: PathLike):
    """Write [n, rows, cols] samples back to IDX (values are re-quantised to bytes)"""
    if len(dataset.sample_shape) != 2:
        raise DatasetFormatError(f"IDX images need [n, rows, cols] samples, got {dataset.sample_shape}")
    images_path, labels_path = Path(images_path), Path(labels_path)
    pixels = np.rint(dataset.inputs * 255.0).clip(0, 255).astype(np.uint8)
    n = len(dataset)
    atomic_write_bytes(images_path, _encode(IMAGES_MAGIC, (n,) + dataset.sample_shape, pixels.tobytes(), images_path))
    atomic_write_bytes(labels_path, _encode(LABELS_MAGIC, (n,), dataset.labels.astype(np.uint8).tobytes(), labels_path))
