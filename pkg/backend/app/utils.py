"""
Utility functions for the pruner
Seeded random streams, atomic file output and display formatting
"""

import math
import os
import tempfile
import zlib
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

MASK64 = (1 << 64) - 1
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

SeedTag = Union[int, str]


def splitmix64(seed: int, count: int) -> np.ndarray:
    """
    Return `count` outputs of the splitmix64 generator started at `seed`.

    Output j is mix(seed + (j + 1) * 0x9E3779B97F4A7C15) with the standard
    splitmix64 finalizer, computed modulo 2**64. The stream is therefore
    identical on every platform and every numpy version.
    """
    state = np.uint64(seed & MASK64)
    steps = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = state + steps * _GAMMA
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        z = z ^ (z >> np.uint64(31))
    return z


def derive_seed(seed: int, *tags: SeedTag) -> int:
    """Derive an independent 64-bit seed from a parent seed and a tag path"""
    value = seed & MASK64
    for tag in tags:
        if isinstance(tag, str):
            tag = zlib.crc32(tag.encode("utf-8"))
        value = int(splitmix64(value ^ (tag & MASK64), 1)[0])
    return value


def uniform(seed: int, shape: Union[int, Tuple[int, ...]], low: float = 0.0, high: float = 1.0) -> np.ndarray:
    """Uniform draws in [low, high) built from the top 53 bits of splitmix64"""
    size = int(np.prod(shape))
    bits = splitmix64(seed, size) >> np.uint64(11)
    unit = bits.astype(np.float64) * (1.0 / 9007199254740992.0)
    return (low + (high - low) * unit).reshape(shape)


def normal(seed: int, shape: Union[int, Tuple[int, ...]]) -> np.ndarray:
    """Standard normal draws via Box-Muller on two splitmix64 streams"""
    size = int(np.prod(shape))
    u1 = 1.0 - uniform(derive_seed(seed, "radius"), size)  # (0, 1]
    u2 = uniform(derive_seed(seed, "angle"), size)
    z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
    return z.reshape(shape)


def permutation(seed: int, n: int) -> np.ndarray:
    """Seeded permutation of range(n) (stable argsort of a splitmix64 stream)"""
    return np.argsort(splitmix64(seed, n), kind="stable")


def round_half_up(value: float) -> int:
    """Round to nearest integer, halves away from zero for non-negative input"""
    return int(math.floor(value + 0.5))


def chunk_indices(indices: np.ndarray, chunk_size: int) -> List[np.ndarray]:
    """Split an index array into consecutive chunks"""
    return [indices[i:i + chunk_size] for i in range(0, len(indices), chunk_size)]


def atomic_write_bytes(path: Union[str, Path], data: bytes) -> Path:
    """Write bytes to a temporary file in the target directory, then rename"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return path


def atomic_write_text(path: Union[str, Path], text: str) -> Path:
    """Text variant of atomic_write_bytes (UTF-8, '\\n' line endings)"""
    return atomic_write_bytes(path, text.encode("utf-8"))


def format_bytes(num_bytes: float, decimals: int = 1) -> str:
    """Format a byte count with decimal units (1 KB = 1000 B), e.g. '1.7MB'"""
    units = ["B", "KB", "MB", "GB", "TB"]
    value = float(num_bytes)
    unit = units[0]
    for unit in units:
        if abs(value) < 1000.0 or unit == units[-1]:
            break
        value /= 1000.0
    if unit == "B":
        return f"{int(num_bytes)}B"
    return f"{value:.{decimals}f}{unit}"


def format_rate(rate: float, decimals: int = 1) -> str:
    """Format a compression rate, e.g. '71.2×' or '30×' with decimals=0"""
    if math.isinf(rate):
        return "inf×"
    return f"{rate:.{decimals}f}×"


def format_count(count: float, decimals: int = 2) -> str:
    """Format a parameter count in the K/M style used by pruning tables"""
    for divisor, suffix in ((1e9, "G"), (1e6, "M"), (1e3, "K")):
        if abs(count) >= divisor:
            return f"{count / divisor:.{decimals}f}{suffix}"
    return str(int(count))
