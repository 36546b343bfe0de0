"""
Storage Report
Compression rate and storage arithmetic of a pruned model at chosen bit-widths
"""

import csv
import io
import logging
import math
from typing import Dict, Optional, Union

import numpy as np

from ..config import get_settings
from ..errors import ConfigError
from ..nn_core.network import Network
from ..pruning.masking import PrunedModel, compression_rate
from ..schemas import IndexMode, LayerStorage, ReportSpec, StorageReport
from ..utils import format_bytes, format_count, format_rate
from .sparse import index_bits

settings = get_settings()
logger = logging.getLogger(__name__)


def _bits_to_bytes(count: int, bits: int) -> int:
    return math.ceil(count * bits / 8)


def relative_entries(indices: np.ndarray, bits: int) -> int:
    """
    Stored entries when each position is coded as a `bits`-bit gap to the
    previous entry. A gap wider than 2**bits needs filler zero entries.
    """
    if len(indices) == 0:
        return 0
    span = 1 << bits
    gaps = np.diff(np.concatenate(([-1], np.asarray(indices, dtype=np.int64))))
    fillers = int(np.sum((gaps - 1) // span))
    return len(indices) + fillers


def _check_bits(bits: int, what: str):
    if not 1 <= bits <= 64:
        raise ConfigError(f"{what} must lie in 1..64, got {bits}")


def storage_report(model: Union[PrunedModel, Network], weight_bits: Optional[int] = None,
                   index_mode: IndexMode = IndexMode.FIXED, relative_bits: Optional[int] = None,
                   layer_bits: Optional[Dict[str, int]] = None) -> StorageReport:
    """
    Data bytes are ceil(entries * weight_bits / 8) per layer; index bytes add
    ceil(entries * index_bits / 8). In fixed mode entries == nnz and
    index_bits == ceil(log2(layer size)); in relative mode index_bits is
    `relative_bits` and entries include the gap fillers.
    """
    net = model.net if isinstance(model, PrunedModel) else model
    weight_bits = settings.REPORT_WEIGHT_BITS if weight_bits is None else weight_bits
    relative_bits = settings.RELATIVE_INDEX_BITS if relative_bits is None else relative_bits
    layer_bits = layer_bits or {}
    _check_bits(weight_bits, "weight bits")
    _check_bits(relative_bits, "relative index bits")
    unknown = set(layer_bits) - set(net.weight_names())
    if unknown:
        raise ConfigError(f"bit-width overrides for unknown layers: {sorted(unknown)}")

    layers = []
    for name, w in net.weights().items():
        bits = layer_bits.get(name, weight_bits)
        _check_bits(bits, f"weight bits of {name}")
        positions = np.flatnonzero(w)
        nnz = len(positions)
        if index_mode == IndexMode.RELATIVE:
            ibits, entries = relative_bits, relative_entries(positions, relative_bits)
        else:
            ibits, entries = index_bits(w.size), nnz
        layers.append(LayerStorage(
            name=name,
            size=w.size,
            nnz=nnz,
            weight_bits=bits,
            index_bits=ibits,
            entries=entries,
            data_bytes=_bits_to_bytes(entries, bits),
            index_bytes=_bits_to_bytes(entries, ibits),
        ))

    total_params = sum(layer.size for layer in layers)
    total_nnz = sum(layer.nnz for layer in layers)
    data_bytes = sum(layer.data_bytes for layer in layers)
    index_bytes = sum(layer.index_bytes for layer in layers)
    return StorageReport(
        total_params=total_params,
        total_nnz=total_nnz,
        rate=compression_rate(total_params, total_nnz),
        weight_bits=weight_bits,
        index_mode=index_mode,
        data_bytes=data_bytes,
        index_bytes=index_bytes,
        total_bytes=data_bytes + index_bytes,
        layers=layers,
    )


def report_from_spec(model: Union[PrunedModel, Network], spec: ReportSpec) -> StorageReport:
    return storage_report(model, spec.weight_bits, spec.index_mode, spec.relative_index_bits, spec.layer_bits)


def render_text(report: StorageReport) -> str:
    """Aligned table in the style of compression-result tables"""
    header = f"{'layer':<12}{'params':>10}{'nonzero':>10}{'rate':>10}{'bits':>6}{'index':>9}{'data':>10}{'w. index':>10}"
    lines = [header, "-" * len(header)]
    for layer in report.layers:
        lines.append(
            f"{layer.name:<12}{format_count(layer.size):>10}{format_count(layer.nnz):>10}"
            f"{format_rate(compression_rate(layer.size, layer.nnz)):>10}{layer.weight_bits:>6}{layer.index_bits:>9}"
            f"{format_bytes(layer.data_bytes):>10}{format_bytes(layer.data_bytes + layer.index_bytes):>10}"
        )
    lines.append("-" * len(header))
    lines.append(
        f"{'total':<12}{format_count(report.total_params):>10}{format_count(report.total_nnz):>10}"
        f"{format_rate(report.rate):>10}{report.weight_bits:>6}{report.index_mode.value:>9}"
        f"{format_bytes(report.data_bytes):>10}{format_bytes(report.total_bytes):>10}"
    )
    return "\n".join(lines)


def render_csv(report: StorageReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["schema_version", "layer", "params", "nnz", "rate", "weight_bits", "index_mode",
                     "index_bits", "entries", "data_bytes", "index_bytes", "total_bytes"])
    version = settings.METRICS_SCHEMA_VERSION
    for layer in report.layers:
        writer.writerow([version, layer.name, layer.size, layer.nnz, repr(compression_rate(layer.size, layer.nnz)),
                         layer.weight_bits, report.index_mode.value, layer.index_bits, layer.entries,
                         layer.data_bytes, layer.index_bytes, layer.data_bytes + layer.index_bytes])
    writer.writerow([version, "total", report.total_params, report.total_nnz, repr(report.rate),
                     report.weight_bits, report.index_mode.value, "", sum(l.entries for l in report.layers),
                     report.data_bytes, report.index_bytes, report.total_bytes])
    return buffer.getvalue()
