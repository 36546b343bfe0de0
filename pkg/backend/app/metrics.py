"""
Metrics CSV files
Fixed, versioned column layouts written atomically so reruns are byte-identical
"""

import csv
import io
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Sequence, Type, Union

from pydantic import BaseModel

from .config import get_settings
from .errors import ConfigError
from .utils import atomic_write_text

settings = get_settings()
logger = logging.getLogger(__name__)

SCHEMA_COLUMN = "schema_version"


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, float):
        return repr(value)  # shortest round-tripping form
    return str(value)


def render_rows(rows: Sequence[BaseModel], record_type: Type[BaseModel]) -> str:
    """CSV text with a schema_version column followed by the record's fields in declaration order"""
    columns = list(record_type.model_fields)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow([SCHEMA_COLUMN] + columns)
    for row in rows:
        writer.writerow([settings.METRICS_SCHEMA_VERSION] + [_cell(getattr(row, c)) for c in columns])
    return buffer.getvalue()


def write_metrics(path: Union[str, Path], rows: Sequence[BaseModel], record_type: Type[BaseModel]) -> Path:
    path = atomic_write_text(path, render_rows(rows, record_type))
    logger.info(f"Wrote {len(rows)} rows to {path}")
    return path


def read_metrics(path: Union[str, Path]) -> List[Dict[str, str]]:
    """Rows of a metrics file as dictionaries; rejects files from another schema version"""
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    for row in rows:
        if row.get(SCHEMA_COLUMN) != str(settings.METRICS_SCHEMA_VERSION):
            raise ConfigError(
                f"{path}: schema version {row.get(SCHEMA_COLUMN)!r}, expected {settings.METRICS_SCHEMA_VERSION}"
            )
    return rows
