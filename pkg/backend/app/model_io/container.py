"""
Binary container shared by checkpoints and sparse exports

Layout (all integers little-endian):
    magic         8 bytes
    header_len    u32
    header        header_len bytes of UTF-8 JSON
    payload       raw tensors, in the order listed by the header
    crc32         u32 over every preceding byte
"""

import json
import logging
import struct
import zlib
from typing import Any, Dict, List, Literal, Tuple

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from ..config import get_settings
from ..errors import CorruptPayloadError, VersionMismatchError

settings = get_settings()
logger = logging.getLogger(__name__)

_LEN = struct.Struct("<I")
_DTYPES = {"f8": np.dtype("<f8"), "i8": np.dtype("<i8")}


class TensorEntry(BaseModel):
    name: str
    dtype: Literal["f8", "i8"] = "f8"
    shape: List[int]

    @property
    def nbytes(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64)) * _DTYPES[self.dtype].itemsize


class ContainerHeader(BaseModel):
    format_version: int
    meta: Dict[str, Any] = Field(default_factory=dict)
    tensors: List[TensorEntry] = Field(default_factory=list)


def _dtype_code(array: np.ndarray) -> str:
    if np.issubdtype(array.dtype, np.floating):
        return "f8"
    if np.issubdtype(array.dtype, np.integer):
        return "i8"
    raise TypeError(f"unsupported tensor dtype {array.dtype}")


def pack(magic: bytes, meta: Dict[str, Any], tensors: Dict[str, np.ndarray]) -> bytes:
    """Serialise metadata and named tensors into one checksummed blob"""
    entries = []
    payload = bytearray()
    for name, array in tensors.items():
        code = _dtype_code(array)
        data = np.ascontiguousarray(array, dtype=_DTYPES[code])
        entries.append(TensorEntry(name=name, dtype=code, shape=list(data.shape)))
        payload += data.tobytes()

    header = ContainerHeader(format_version=settings.CHECKPOINT_FORMAT_VERSION, meta=meta, tensors=entries)
    header_bytes = header.model_dump_json().encode("utf-8")
    body = magic + _LEN.pack(len(header_bytes)) + header_bytes + bytes(payload)
    return body + _LEN.pack(zlib.crc32(body) & 0xFFFFFFFF)


def unpack(magic: bytes, data: bytes) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    """
    Inverse of `pack`. Raises CorruptPayloadError for a wrong magic, a
    truncated or oversized file or a checksum failure, and
    VersionMismatchError for files from a newer format version.
    """
    fixed = len(magic) + _LEN.size
    if len(data) < fixed + _LEN.size:
        raise CorruptPayloadError(f"corrupt payload: {len(data)} bytes is too short")
    if data[:len(magic)] != magic:
        raise CorruptPayloadError(f"corrupt payload: expected magic {magic!r}, found {bytes(data[:len(magic)])!r}")

    (header_len,) = _LEN.unpack_from(data, len(magic))
    if fixed + header_len + _LEN.size > len(data):
        raise CorruptPayloadError("corrupt payload: header length exceeds file size")
    try:
        header = ContainerHeader.model_validate(json.loads(data[fixed:fixed + header_len].decode("utf-8")))
    except (UnicodeDecodeError, ValueError, ValidationError) as e:
        raise CorruptPayloadError(f"corrupt payload: unreadable header ({e})") from None

    if header.format_version > settings.CHECKPOINT_FORMAT_VERSION:
        raise VersionMismatchError(
            f"version mismatch: file has format {header.format_version}, "
            f"this build reads up to {settings.CHECKPOINT_FORMAT_VERSION}"
        )

    (stored_crc,) = _LEN.unpack_from(data, len(data) - _LEN.size)
    if zlib.crc32(data[:-_LEN.size]) & 0xFFFFFFFF != stored_crc:
        raise CorruptPayloadError("corrupt payload: checksum mismatch")

    offset = fixed + header_len
    expected = offset + sum(entry.nbytes for entry in header.tensors) + _LEN.size
    if expected != len(data):
        raise CorruptPayloadError(f"corrupt payload: expected {expected} bytes, file has {len(data)}")

    tensors: Dict[str, np.ndarray] = {}
    for entry in header.tensors:
        dtype = _DTYPES[entry.dtype]
        if entry.nbytes == 0:
            tensors[entry.name] = np.zeros(entry.shape, dtype=dtype.newbyteorder("="))
            continue
        array = np.frombuffer(data, dtype=dtype, count=entry.nbytes // dtype.itemsize, offset=offset)
        tensors[entry.name] = array.reshape(entry.shape).astype(dtype.newbyteorder("="), copy=True)
        offset += entry.nbytes
    return header.meta, tensors
