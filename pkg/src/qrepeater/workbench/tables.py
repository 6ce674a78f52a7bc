"""Self-describing result tables with CSV and JSON persistence.

Cells hold ``float``, ``int``, ``bool``, ``str`` or ``None``.  Both formats
parse back to the same values:

* CSV uses the ``csv`` module (RFC 4180 quoting).  Floats are written with
  ``repr`` precision, in ``.16e`` scientific notation when ``0 < |x| < 1e-3``.
  Booleans are ``true``/``false``, ``None`` is an empty field and
  non-finite floats are ``inf``, ``-inf`` and ``nan``.
* JSON is a list of records.  Non-finite floats use the ``Infinity``/``NaN``
  tokens that Python, pandas and most numeric readers accept.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Sequence

FORMATS = ("csv", "json")

_INT_RE = re.compile(r"^[+-]?\d+$")
_FLOAT_RE = re.compile(r"^[+-]?(\d+\.?\d*([eE][+-]?\d+)?|\.\d+([eE][+-]?\d+)?|inf|nan)$")


def format_float(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if 0.0 < abs(x) < 1e-3:
        return format(x, ".16e")
    return repr(x)


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, int):
        return str(value)
    return str(value)


def parse_cell(text: str) -> Any:
    """Inverse of :func:`format_cell` (strings that look numeric parse as numbers)."""
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    if _INT_RE.match(text):
        return int(text)
    if _FLOAT_RE.match(text.lower()):
        return float(text)
    return text


def _plain(value: Any) -> Any:
    # numpy scalars and other number-likes become builtin types
    if value is None or isinstance(value, (bool, str)):
        return value
    if hasattr(value, "item"):
        value = value.item()
    if isinstance(value, bool):
        return value
    if isinstance(value, int):
        return int(value)
    if isinstance(value, float):
        return float(value)
    return value


@dataclass
class ResultTable:
    """Row-major records under a fixed column order.

    Every row carries the full parameter tuple that produced it, so a table
    can be read without its manifest.
    """

    columns: list[str]
    rows: list[dict[str, Any]] = field(default_factory=list)

    def append(self, row: Mapping[str, Any]) -> None:
        extra = set(row) - set(self.columns)
        if extra:
            raise KeyError(f"row has columns outside the schema: {sorted(extra)}")
        self.rows.append({c: _plain(row.get(c)) for c in self.columns})

    def extend(self, rows: Iterable[Mapping[str, Any]]) -> None:
        for row in rows:
            self.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[dict[str, Any]]:
        return iter(self.rows)

    def column(self, name: str) -> list[Any]:
        return [row[name] for row in self.rows]

    @classmethod
    def from_records(cls, rows: Sequence[Mapping[str, Any]], columns: Sequence[str] | None = None) -> "ResultTable":
        if columns is None:
            columns = []
            for row in rows:
                columns.extend(k for k in row if k not in columns)
        table = cls(list(columns))
        table.extend(rows)
        return table

    # serialization
    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([format_cell(row[c]) for c in self.columns])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.rows, indent=1) + "\n"

    def dumps(self, fmt: str) -> str:
        if fmt == "csv":
            return self.to_csv()
        if fmt == "json":
            return self.to_json()
        raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")

    def write(self, path, fmt: str | None = None) -> Path:
        path = Path(path)
        fmt = fmt or path.suffix.lstrip(".")
        path.write_text(self.dumps(fmt), encoding="utf-8", newline="")
        return path

    @classmethod
    def from_csv(cls, text: str) -> "ResultTable":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        table = cls(header)
        for fields in reader:
            table.rows.append({c: parse_cell(v) for c, v in zip(header, fields)})
        return table

    @classmethod
    def from_json(cls, text: str) -> "ResultTable":
        rows = json.loads(text)
        return cls.from_records(rows)

    @classmethod
    def read(cls, path) -> "ResultTable":
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        if path.suffix == ".json":
            return cls.from_json(text)
        return cls.from_csv(text)


def values_equal(a: Any, b: Any) -> bool:
    """Cell equality that treats NaN as equal to NaN."""
    if isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b):
        return True
    return type(a) is type(b) and a == b


def tables_equal(a: ResultTable, b: ResultTable) -> bool:
    if a.columns != b.columns or len(a) != len(b):
        return False
    return all(values_equal(ra[c], rb[c]) for ra, rb in zip(a.rows, b.rows) for c in a.columns)
