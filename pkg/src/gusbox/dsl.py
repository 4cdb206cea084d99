"""JSON plan documents: the user-facing description of tables, the operator
tree, and requested quantiles.

Node objects use an ``op`` discriminator: scan, select, join, cross, union,
sample, sum. Errors carry the JSON path to the offending element.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping

from .engine import COLUMN_TYPES
from .errors import PlanError
from .plan import (
    BernoulliSpec,
    Comparison,
    Cross,
    Join,
    JoinSpec,
    LineageBernoulliSpec,
    PlanNode,
    Predicate,
    Sample,
    Scan,
    Select,
    SumAggregate,
    UnionDedup,
    WorSpec,
    validate_plan,
)

_OPS = ("scan", "select", "join", "cross", "union", "sample", "sum")


@dataclass(frozen=True)
class TableSpec:
    name: str
    path: str
    id_column: str                      # column name, expression, or "rowIndex"
    column_types: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class PlanDocument:
    tables: dict[str, TableSpec]
    plan: PlanNode
    quantiles: tuple[float, ...]


def _need(obj: Mapping, key: str, path: str):
    if key not in obj:
        raise PlanError(f"{path}: missing required key {key!r}")
    return obj[key]


def _no_extras(obj: Mapping, allowed: set, path: str):
    extra = set(obj) - allowed
    if extra:
        raise PlanError(f"{path}: unexpected key(s) {sorted(extra)}")


def _parse_atom(doc, path: str) -> Comparison:
    if not isinstance(doc, dict):
        raise PlanError(f"{path}: predicate atom must be an object")
    _no_extras(doc, {"col", "cmp", "value", "col2"}, path)
    col = _need(doc, "col", path)
    cmp_op = _need(doc, "cmp", path)
    if "col2" in doc:
        return Comparison(col, cmp_op, other_col=doc["col2"])
    return Comparison(col, cmp_op, value=_need(doc, "value", path))


def _parse_predicate(doc, path: str) -> Predicate:
    if not isinstance(doc, list):
        raise PlanError(f"{path}: predicate must be a list of atoms")
    return Predicate(tuple(_parse_atom(a, f"{path}[{i}]") for i, a in enumerate(doc)))


def _parse_method(doc, path: str):
    if not isinstance(doc, dict):
        raise PlanError(f"{path}: sampler method must be an object")
    kind = _need(doc, "method", path)
    try:
        if kind == "bernoulli":
            _no_extras(doc, {"method", "p", "seed"}, path)
            return BernoulliSpec(float(_need(doc, "p", path)), int(doc.get("seed", 0)))
        if kind == "wor":
            _no_extras(doc, {"method", "n", "seed"}, path)
            return WorSpec(int(_need(doc, "n", path)), int(doc.get("seed", 0)))
        if kind == "lineage_bernoulli":
            _no_extras(doc, {"method", "dims"}, path)
            dims_doc = _need(doc, "dims", path)
            if not isinstance(dims_doc, dict) or not dims_doc:
                raise PlanError(f"{path}.dims: need a non-empty object of relations")
            dims = {}
            for name, entry in dims_doc.items():
                _no_extras(entry, {"p", "seed"}, f"{path}.dims.{name}")
                dims[name] = (float(_need(entry, "p", f"{path}.dims.{name}")),
                              int(entry.get("seed", 0)))
            return LineageBernoulliSpec.of(dims)
    except (TypeError, ValueError) as exc:
        raise PlanError(f"{path}: {exc}") from None
    raise PlanError(f"{path}: unknown sampling method {kind!r}")


def _parse_node(doc, tables: Mapping[str, TableSpec], path: str,
                at_root: bool) -> PlanNode:
    if not isinstance(doc, dict):
        raise PlanError(f"{path}: plan node must be an object")
    op = _need(doc, "op", path)
    if op not in _OPS:
        raise PlanError(f"{path}: unknown op {op!r}; expected one of {_OPS}")
    if op == "scan":
        _no_extras(doc, {"op", "table"}, path)
        table = _need(doc, "table", path)
        if table not in tables:
            raise PlanError(f"{path}: table {table!r} is not declared")
        return Scan(table)
    if op == "select":
        _no_extras(doc, {"op", "where", "child"}, path)
        return Select(
            _parse_predicate(_need(doc, "where", path), f"{path}.where"),
            _parse_node(_need(doc, "child", path), tables, f"{path}.child", False),
        )
    if op == "join":
        _no_extras(doc, {"op", "eq", "theta", "left", "right"}, path)
        eq_doc = doc.get("eq", [])
        if not isinstance(eq_doc, list):
            raise PlanError(f"{path}.eq: must be a list of [left, right] column pairs")
        equi = []
        for i, pair in enumerate(eq_doc):
            if not (isinstance(pair, list) and len(pair) == 2):
                raise PlanError(f"{path}.eq[{i}]: must be a [left, right] column pair")
            equi.append((pair[0], pair[1]))
        residual = _parse_predicate(doc.get("theta", []), f"{path}.theta")
        return Join(
            JoinSpec(tuple(equi), residual),
            _parse_node(_need(doc, "left", path), tables, f"{path}.left", False),
            _parse_node(_need(doc, "right", path), tables, f"{path}.right", False),
        )
    if op == "cross":
        _no_extras(doc, {"op", "left", "right"}, path)
        return Cross(
            _parse_node(_need(doc, "left", path), tables, f"{path}.left", False),
            _parse_node(_need(doc, "right", path), tables, f"{path}.right", False),
        )
    if op == "union":
        _no_extras(doc, {"op", "left", "right"}, path)
        return UnionDedup(
            _parse_node(_need(doc, "left", path), tables, f"{path}.left", False),
            _parse_node(_need(doc, "right", path), tables, f"{path}.right", False),
        )
    if op == "sample":
        _no_extras(doc, {"op", "method", "child"}, path)
        return Sample(
            _parse_method(_need(doc, "method", path), f"{path}.method"),
            _parse_node(_need(doc, "child", path), tables, f"{path}.child", False),
        )
    # op == "sum"
    if not at_root:
        raise PlanError(f"{path}: sum aggregate may appear only at the plan root")
    _no_extras(doc, {"op", "expr", "child"}, path)
    expr = _need(doc, "expr", path)
    if not isinstance(expr, str):
        raise PlanError(f"{path}.expr: must be a string expression")
    return SumAggregate(
        expr, _parse_node(_need(doc, "child", path), tables, f"{path}.child", False))


def parse_plan(text: str) -> PlanDocument:
    """Parse and validate a plan document; raises PlanError with a JSON path
    on anything malformed."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PlanError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise PlanError("top level: plan document must be an object")
    _no_extras(doc, {"tables", "plan", "quantiles"}, "top level")

    tables_doc = _need(doc, "tables", "top level")
    if not isinstance(tables_doc, dict) or not tables_doc:
        raise PlanError("tables: need a non-empty object of table declarations")
    tables = {}
    for name, spec in tables_doc.items():
        path = f"tables.{name}"
        if not isinstance(spec, dict):
            raise PlanError(f"{path}: table declaration must be an object")
        _no_extras(spec, {"path", "idColumn", "columnTypes"}, path)
        types_doc = _need(spec, "columnTypes", path)
        if not isinstance(types_doc, dict) or not types_doc:
            raise PlanError(f"{path}.columnTypes: need a non-empty object")
        for col, ctype in types_doc.items():
            if ctype not in COLUMN_TYPES:
                raise PlanError(
                    f"{path}.columnTypes.{col}: unknown type {ctype!r}; "
                    f"expected one of {COLUMN_TYPES}"
                )
        tables[name] = TableSpec(
            name=name,
            path=_need(spec, "path", path),
            id_column=spec.get("idColumn", "rowIndex"),
            column_types=tuple(types_doc.items()),
        )

    plan = _parse_node(_need(doc, "plan", "top level"), tables, "plan", True)
    try:
        validate_plan(plan)
    except PlanError:
        raise
    except Exception as exc:
        raise PlanError(f"plan: {exc}") from exc

    quantiles_doc = doc.get("quantiles", [])
    if not isinstance(quantiles_doc, list):
        raise PlanError("quantiles: must be a list of numbers in (0, 1)")
    quantiles = []
    for i, q in enumerate(quantiles_doc):
        if not isinstance(q, (int, float)) or not 0.0 < q < 1.0:
            raise PlanError(f"quantiles[{i}]: {q!r} is not in (0, 1)")
        quantiles.append(float(q))

    return PlanDocument(tables=tables, plan=plan, quantiles=tuple(quantiles))
