"""CSV ingestion into typed base tables with unique row ids."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Mapping, Sequence, Union

from .engine import COLUMN_TYPES, BaseTable
from .errors import ExpressionError, IngestError
from .exprs import compile_int_arith

_PARSERS = {"int64": int, "float64": float, "string": str}


def ingest_csv(path: Union[str, Path], name: str,
               column_types: Union[Mapping[str, str], Sequence[tuple[str, str]]],
               id_column: str = "rowIndex") -> BaseTable:
    """Load a headered CSV into a typed table.

    ``id_column`` selects the unique 64-bit row id: the literal string
    ``"rowIndex"`` numbers rows 0..N-1, a declared int64 column uses its
    values, and anything else is treated as an integer expression over the
    declared columns (e.g. a key combination like ``okey*10+lineno``).
    """
    pairs = list(column_types.items()) if isinstance(column_types, Mapping) \
        else list(column_types)
    columns = tuple(c for c, _ in pairs)
    types = tuple(t for _, t in pairs)
    for col, ctype in pairs:
        if ctype not in COLUMN_TYPES:
            raise IngestError(f"table {name}: unknown type {ctype!r} for column {col!r}")

    path = Path(path)
    if not path.exists():
        raise IngestError(f"table {name}: file {path} does not exist")
    rows = []
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        missing = [c for c in columns if c not in header]
        if missing:
            raise IngestError(f"table {name}: missing column(s) {missing} in {path}")
        for lineno, record in enumerate(reader, start=2):
            values = []
            for col, ctype in pairs:
                raw = record.get(col)
                if raw is None or raw == "":
                    raise IngestError(
                        f"table {name}: missing value for {col!r} at line {lineno}")
                try:
                    values.append(_PARSERS[ctype](raw))
                except ValueError:
                    raise IngestError(
                        f"table {name}: cannot parse {raw!r} as {ctype} "
                        f"for {col!r} at line {lineno}") from None
            rows.append(tuple(values))

    if id_column == "rowIndex":
        ids = tuple(range(len(rows)))
    elif id_column in columns:
        idx = columns.index(id_column)
        if types[idx] != "int64":
            raise IngestError(f"table {name}: id column {id_column!r} must be int64")
        ids = tuple(row[idx] for row in rows)
    else:
        try:
            fn = compile_int_arith(id_column, columns, types,
                                   what=f"table {name} id expression")
        except ExpressionError as exc:
            raise IngestError(str(exc)) from None
        ids = tuple(fn(row) for row in rows)

    if len(set(ids)) != len(ids):
        raise IngestError(f"table {name}: duplicate row ids from {id_column!r}")
    return BaseTable(name=name, columns=columns, column_types=types,
                     ids=ids, rows=tuple(rows))
