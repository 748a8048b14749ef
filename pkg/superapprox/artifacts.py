"""Deterministic CSV/JSON output with sha256 sidecars."""

import csv
import hashlib
import io
import json
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .errors import ValidationError
from .spectral import SurveyRow

SURVEY_COLUMNS = ("q", "order", "lambda", "method", "iterations", "seconds")


@dataclass(frozen=True)
class Artifact:
    path: Path
    sha256: str
    digest_path: Path


def file_sha256(path: Path) -> str:
    sha256 = hashlib.sha256()
    with open(path, "rb") as handle:
        while chunk := handle.read(8192):
            sha256.update(chunk)
    return sha256.hexdigest()


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple, dict)):
        return json.dumps(value, sort_keys=True, separators=(",", ":"))
    return str(value)


def render_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buffer.getvalue()


def _seconds(row: SurveyRow, timings: bool) -> float:
    return round(row.seconds, 6) if timings else 0.0


def survey_csv(rows: Sequence[SurveyRow], timings: bool = True) -> str:
    """``q,order,lambda,method,iterations,seconds``; failed rows leave the numbers empty."""
    return render_csv(
        SURVEY_COLUMNS,
        (
            (r.q, r.order, r.lam, r.method, r.iterations, _seconds(r, timings))
            for r in rows
        ),
    )


def survey_records(rows: Sequence[SurveyRow], timings: bool = True) -> list[dict[str, Any]]:
    records = []
    for row in rows:
        record = row.as_record()
        record["seconds"] = _seconds(row, timings)
        records.append(record)
    return records


def payload_csv(payload: dict[str, Any]) -> str:
    """Two-column ``field,value`` rendering of a result payload."""
    return render_csv(("field", "value"), sorted(payload.items()))


def render_json(payload: Any) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def write_artifact(path: Path, text: str) -> Artifact:
    """Write ``text`` and a ``<name>.sha256`` sidecar next to it."""
    if path.exists() and path.is_dir():
        raise ValidationError(f"Output path is a directory: {path}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    digest = file_sha256(path)
    digest_path = path.with_name(path.name + ".sha256")
    digest_path.write_text(f"{digest}  {path.name}\n", encoding="utf-8")
    return Artifact(path, digest, digest_path)
