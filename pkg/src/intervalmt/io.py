"""Reading and writing data tables, critical values and JSON reports."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .errors import DataError
from .statistics import ContingencyTable, CriticalValues, SampleMatrix

Data = Union[ContingencyTable, SampleMatrix]

SCHEMA_VERSION = 1
MODELS = ("multinomial", "normal", "rank")
LABEL_HEADER = "label"


@dataclass
class RunSpec:
    """Fully resolved settings of one command, embedded in every report."""

    subcommand: str
    model: str | None = None
    family: str | None = None
    procedure: str | None = None
    sided: str | None = None
    criticals_source: str | None = None
    criticals: list[float] | None = None
    alpha: float | None = None
    input: str | None = None
    output: str | None = None
    seed: int | None = None
    extra: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def make_report(spec: RunSpec, **body) -> dict:
    return {"schema": SCHEMA_VERSION, "run_spec": spec.to_dict(), **body}


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, default=_json_default, allow_nan=False)


def write_text(path, text: str) -> None:
    Path(path).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")


# ------------------------------------------------------------------ #
# Tables
# ------------------------------------------------------------------ #


def _is_number(cell: str) -> bool:
    try:
        return math.isfinite(float(cell))
    except ValueError:
        return False


def _infer_format(path: Path, fmt: str | None) -> str:
    if fmt:
        if fmt not in ("csv", "json"):
            raise DataError(f"unknown table format {fmt!r}; expected csv or json")
        return fmt
    return "json" if path.suffix.lower() == ".json" else "csv"


def _build(model: str, values: np.ndarray, labels: tuple[str, ...], n: int | None) -> Data:
    if model not in MODELS:
        raise DataError(f"unknown model {model!r}; expected one of {MODELS}")
    if model == "multinomial":
        return ContingencyTable(values, labels)
    if model == "rank":
        return SampleMatrix(values, "rank-means", n, labels)
    return SampleMatrix(values, "normal", None, labels)


def parse_csv(text: str, model: str = "multinomial", n: int | None = None) -> Data:
    """Parse CSV text: plain decimal cells, optional header row, optional label column.

    A first row whose cells (after the first) are all non-numeric is a
    header; a header starting with ``label`` or an empty cell marks the
    first column as row labels.  Otherwise a first column with no numeric
    cells is taken as labels.
    """
    rows = [(lineno, [c.strip() for c in row])
            for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1)
            if any(c.strip() for c in row)]
    if not rows:
        raise DataError("no data rows")
    has_labels = None
    first = rows[0][1]
    if len(first) > 1 and not any(_is_number(c) for c in first[1:]) or (
            len(first) == 1 and not _is_number(first[0]) and len(rows) > 1
            and all(_is_number(r[1][0]) for r in rows[1:] if r[1])):
        if len(first) > 1 and first[0].lower() in (LABEL_HEADER, ""):
            has_labels = True
        rows = rows[1:]
    if not rows:
        raise DataError("no data rows")
    if has_labels is None:
        has_labels = all(len(r) > 1 and not _is_number(r[0]) for _, r in rows)

    labels, matrix = [], []
    width = None
    for lineno, cells in rows:
        if has_labels:
            labels.append(cells[0])
            cells = cells[1:]
        if width is None:
            width = len(cells)
            if width == 0:
                raise DataError(f"row {lineno} has no values")
        elif len(cells) != width:
            raise DataError(f"ragged table: row {lineno} has {len(cells)} values, expected {width}")
        row = []
        for col, cell in enumerate(cells, start=1 + has_labels):
            try:
                value = float(cell)
            except ValueError:
                raise DataError(f"non-numeric cell {cell!r} at row {lineno}, column {col}") from None
            if not math.isfinite(value):
                raise DataError(f"non-finite cell {cell!r} at row {lineno}, column {col}")
            if model == "multinomial" and value < 0:
                raise DataError(f"negative count {cell} at row {lineno}, column {col}")
            row.append(value)
        matrix.append(row)
    return _build(model, np.array(matrix, dtype=float), tuple(labels), n)


def parse_json(text: str, model: str | None = None, n: int | None = None) -> Data:
    """Parse a JSON table.

    Accepts a bare list of rows, or an object with ``counts`` or ``values``
    plus optional ``model``, ``row_labels`` and ``n``.
    """
    try:
        obj = json.loads(text) if text.strip() else None
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if obj is None:
        raise DataError("no data rows")
    labels: tuple[str, ...] = ()
    if isinstance(obj, dict):
        file_model = obj.get("model")
        if file_model and model and file_model != model:
            raise DataError(f"file declares model {file_model!r} but {model!r} was requested")
        model = file_model or model
        rows = obj.get("counts", obj.get("values"))
        labels = tuple(str(s) for s in obj.get("row_labels", ()))
        n = obj.get("n", n)
    else:
        rows = obj
    model = model or "multinomial"
    if not isinstance(rows, list) or not rows:
        raise DataError("no data rows")
    matrix = []
    width = None
    for r, row in enumerate(rows, start=1):
        row = row if isinstance(row, list) else [row]
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DataError(f"ragged table: row {r} has {len(row)} values, expected {width}")
        for c, cell in enumerate(row, start=1):
            if isinstance(cell, bool) or not isinstance(cell, (int, float)) or not math.isfinite(cell):
                raise DataError(f"non-numeric cell {cell!r} at row {r}, column {c}")
            if model == "multinomial" and cell < 0:
                raise DataError(f"negative count {cell} at row {r}, column {c}")
        matrix.append([float(v) for v in row])
    return _build(model, np.array(matrix, dtype=float), labels, n)


def ingest_table(path, fmt: str | None = None, model: str | None = None, n: int | None = None) -> Data:
    """Load a data table from ``path`` (format inferred from the suffix)."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    text = path.read_text(encoding="utf-8")
    if _infer_format(path, fmt) == "json":
        return parse_json(text, model, n)
    return parse_csv(text, model or "multinomial", n)


def _model_of(data: Data) -> str:
    return data.model


def _values_of(data: Data) -> np.ndarray:
    return data.counts if isinstance(data, ContingencyTable) else data.values


def format_csv(data: Data) -> str:
    vals = _values_of(data)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([LABEL_HEADER] + [f"c{j + 1}" for j in range(vals.shape[1])])
    for label, row in zip(data.row_labels, vals):
        w.writerow([label] + [repr(float(v)) for v in row])
    return buf.getvalue()


def format_json(data: Data) -> str:
    obj = {"model": _model_of(data), "row_labels": list(data.row_labels)}
    key = "counts" if isinstance(data, ContingencyTable) else "values"
    obj[key] = _values_of(data).tolist()
    if isinstance(data, SampleMatrix) and data.kind == "rank-means":
        obj["n"] = data.n
    return json.dumps(obj, indent=2)


def emit_table(data: Data, path, fmt: str | None = None) -> None:
    """Write ``data`` so that ``ingest_table`` reads back an equal object.

    The CSV form does not carry ``n`` for rank data; pass it again on reading.
    """
    path = Path(path)
    text = format_json(data) if _infer_format(path, fmt) == "json" else format_csv(data)
    write_text(path, text)


# ------------------------------------------------------------------ #
# Critical values
# ------------------------------------------------------------------ #


def read_criticals(path) -> CriticalValues:
    """Critical values from a file: JSON list, or numbers separated by commas/whitespace."""
    path = Path(path)
    text = path.read_text(encoding="utf-8").strip()
    if not text:
        raise DataError(f"{path}: no critical values")
    try:
        if text.startswith("[") or text.startswith("{"):
            obj = json.loads(text)
            vals = obj["values"] if isinstance(obj, dict) else obj
        else:
            vals = [float(t) for t in text.replace(",", " ").split()]
        return CriticalValues(tuple(vals), source=f"file:{path}")
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"{path}: cannot read critical values ({exc})") from None
