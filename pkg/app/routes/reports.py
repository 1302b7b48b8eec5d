"""Report envelope shared by every subcommand, and its JSON / CSV renderings.

JSON is the source of truth. Non-finite floats become the strings "inf", "-inf"
and "nan"; CSV is a flat key,value projection whose numbers are written with the
same repr as JSON.
"""
import csv
import io
import json
import math
from typing import Any, Dict, Iterator, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from app import config


class ReportEnvelope(BaseModel):
    command: str
    parameters: Dict[str, Any]
    results: Any
    certified: bool
    seed: Optional[int] = None
    tool_version: str = config.TOOL_VERSION
    report_schema: str = Field(default=config.REPORT_SCHEMA, serialization_alias="schema")


class ErrorReport(BaseModel):
    command: Optional[str]
    error: str
    message: str
    tool_version: str = config.TOOL_VERSION
    report_schema: str = Field(default=config.REPORT_SCHEMA, serialization_alias="schema")


def _float(value: float):
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


def to_plain(value: Any) -> Any:
    """Recursively convert models, numpy values and non-finite floats to JSON-ready values."""
    if isinstance(value, BaseModel):
        return to_plain(value.model_dump(by_alias=True))
    if isinstance(value, dict):
        return {str(key): to_plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return _float(float(value))
    return value


def render_json(report: BaseModel) -> str:
    return json.dumps(to_plain(report), indent=2, sort_keys=True, allow_nan=False)


def flatten(value: Any, prefix: str = "") -> Iterator[Tuple[str, Any]]:
    """Dotted-key leaves of a plain payload; list positions become numeric keys."""
    if isinstance(value, dict):
        for key in sorted(value):
            yield from flatten(value[key], f"{prefix}.{key}" if prefix else str(key))
    elif isinstance(value, list):
        if not value:
            yield prefix, ""
        for i, item in enumerate(value):
            yield from flatten(item, f"{prefix}.{i}" if prefix else str(i))
    else:
        yield prefix, value


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(report: BaseModel) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["key", "value"])
    for key, value in flatten(to_plain(report)):
        writer.writerow([key, _cell(value)])
    return buffer.getvalue()


def render(report: BaseModel, fmt: str = "json") -> str:
    if fmt == "csv":
        return render_csv(report)
    return render_json(report)
