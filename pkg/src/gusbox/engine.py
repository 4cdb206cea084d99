"""Deterministic in-memory execution of plans with lineage propagation.

Operators are pure functions of immutable inputs. Joins hash on equality
pairs and fall back to nested loops for pure theta conditions; output rows
carry the canonical merge of both lineage vectors. No NULLs anywhere:
ingestion rejects missing values, so operators never see them.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable, Mapping, Sequence

from . import samplers
from .errors import ExpressionError, PlanError, SchemaError
from .exprs import compile_arith
from .model import LineageSchema, Row, SampleRelation
from .plan import (
    BernoulliSpec,
    Cross,
    GusQuasi,
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
)

COLUMN_TYPES = ("int64", "float64", "string")

_PYTHON_TYPES = {"int64": int, "float64": float, "string": str}

_CMP_FUNCS = {
    "=": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}


@dataclass(frozen=True)
class BaseTable:
    """Typed rows plus a unique 64-bit id per row."""

    name: str
    columns: tuple[str, ...]
    column_types: tuple[str, ...]
    ids: tuple[int, ...]
    rows: tuple[tuple, ...]

    def __post_init__(self):
        if len(self.columns) != len(self.column_types):
            raise SchemaError(f"table {self.name}: columns and types must align")
        for t in self.column_types:
            if t not in COLUMN_TYPES:
                raise SchemaError(f"table {self.name}: unknown column type {t!r}")
        if len(self.ids) != len(self.rows):
            raise SchemaError(f"table {self.name}: ids and rows must align")
        if len(set(self.ids)) != len(self.ids):
            raise SchemaError(f"table {self.name}: duplicate row ids")
        for row in self.rows:
            if len(row) != len(self.columns):
                raise SchemaError(f"table {self.name}: row arity mismatch")
            for value, ctype in zip(row, self.column_types):
                if type(value) is not _PYTHON_TYPES[ctype]:
                    raise SchemaError(
                        f"table {self.name}: value {value!r} does not match type {ctype}"
                    )

    def __len__(self) -> int:
        return len(self.rows)

    @cached_property
    def relation(self) -> SampleRelation:
        schema = LineageSchema.of([self.name])
        rows = tuple(Row(values, (tid,), 0.0) for values, tid in zip(self.rows, self.ids))
        return SampleRelation(schema, self.columns, self.column_types, rows)


Catalog = Mapping[str, BaseTable]


def _check_comparable(lhs_type: str, rhs) -> None:
    if lhs_type == "string":
        if not isinstance(rhs, str):
            raise ExpressionError(f"cannot compare string column with {rhs!r}")
    else:
        if not isinstance(rhs, (int, float)) or isinstance(rhs, bool):
            raise ExpressionError(f"cannot compare numeric column with {rhs!r}")


def bind_predicate(pred: Predicate, columns: Sequence[str],
                   types: Sequence[str]) -> Callable[[tuple], bool]:
    """Type-check atoms against the input schema and compile to a row test."""
    columns = list(columns)
    compiled = []
    for atom in pred.atoms:
        if atom.col not in columns:
            raise ExpressionError(f"predicate references unknown column {atom.col!r}")
        i = columns.index(atom.col)
        fn = _CMP_FUNCS[atom.op]
        if atom.other_col is not None:
            if atom.other_col not in columns:
                raise ExpressionError(f"predicate references unknown column {atom.other_col!r}")
            j = columns.index(atom.other_col)
            lt, rt = types[i], types[j]
            if (lt == "string") != (rt == "string"):
                raise ExpressionError(
                    f"cannot compare {atom.col} ({lt}) with {atom.other_col} ({rt})"
                )
            compiled.append((fn, i, j, True))
        else:
            _check_comparable(types[i], atom.value)
            compiled.append((fn, i, atom.value, False))

    def test(values: tuple) -> bool:
        for fn, i, rhs, is_col in compiled:
            other = values[rhs] if is_col else rhs
            if not fn(values[i], other):
                return False
        return True

    return test


def scan(table: BaseTable) -> SampleRelation:
    return table.relation


def select(pred: Predicate, r: SampleRelation) -> SampleRelation:
    if not pred.atoms:
        return r
    test = bind_predicate(pred, r.columns, r.column_types)
    return r.with_rows([row for row in r.rows if test(row.values)])


@lru_cache(maxsize=None)
def _merge_maps(left: LineageSchema, right: LineageSchema):
    merged = left.merge_disjoint(right)
    left_pos = [merged.index(name) for name in left.relations]
    right_pos = [merged.index(name) for name in right.relations]
    return merged, tuple(left_pos), tuple(right_pos)


def _merge_lineage(left_lin, right_lin, left_pos, right_pos, n):
    out = [0] * n
    for value, pos in zip(left_lin, left_pos):
        out[pos] = value
    for value, pos in zip(right_lin, right_pos):
        out[pos] = value
    return tuple(out)


def join(cond: JoinSpec, left: SampleRelation, right: SampleRelation) -> SampleRelation:
    merged_schema, left_pos, right_pos = _merge_maps(left.schema, right.schema)
    overlap = set(left.columns) & set(right.columns)
    if overlap:
        raise SchemaError(f"join sides share column names {sorted(overlap)}")
    columns = left.columns + right.columns
    types = left.column_types + right.column_types

    residual = None
    if cond.residual.atoms:
        residual = bind_predicate(cond.residual, columns, types)

    out = []
    n = merged_schema.n
    if cond.equi:
        left_idx = [left.column_index(lc) for lc, _ in cond.equi]
        right_idx = [right.column_index(rc) for _, rc in cond.equi]
        buckets: dict = {}
        for row in left.rows:
            key = tuple(row.values[i] for i in left_idx)
            buckets.setdefault(key, []).append(row)
        for rrow in right.rows:
            key = tuple(rrow.values[i] for i in right_idx)
            for lrow in buckets.get(key, ()):
                values = lrow.values + rrow.values
                if residual is not None and not residual(values):
                    continue
                lineage = _merge_lineage(lrow.lineage, rrow.lineage, left_pos, right_pos, n)
                out.append(Row(values, lineage, 0.0))
    else:
        for lrow in left.rows:
            for rrow in right.rows:
                values = lrow.values + rrow.values
                if residual is not None and not residual(values):
                    continue
                lineage = _merge_lineage(lrow.lineage, rrow.lineage, left_pos, right_pos, n)
                out.append(Row(values, lineage, 0.0))
    out.sort(key=lambda row: row.lineage)
    return SampleRelation(merged_schema, columns, types, tuple(out))


def cross(left: SampleRelation, right: SampleRelation) -> SampleRelation:
    return join(JoinSpec(), left, right)


def union_dedup(left: SampleRelation, right: SampleRelation) -> SampleRelation:
    if left.schema != right.schema:
        raise SchemaError(
            f"union over different lineage schemas: {left.schema.relations} vs "
            f"{right.schema.relations}"
        )
    if left.columns != right.columns or left.column_types != right.column_types:
        raise SchemaError("union sides must have identical columns")
    seen = {row.lineage for row in left.rows}
    rows = list(left.rows)
    rows.extend(row for row in right.rows if row.lineage not in seen)
    rows.sort(key=lambda row: row.lineage)
    return left.with_rows(rows)


def bind_aggregate(expr: str, r: SampleRelation) -> SampleRelation:
    """Evaluate the aggregate expression per row into the ``f`` slot."""
    fn = compile_arith(expr, r.columns, r.column_types, what=f"aggregate {expr!r}")
    return r.with_rows([Row(row.values, row.lineage, float(fn(row.values))) for row in r.rows])


def sum_aggregate(expr: str, r: SampleRelation) -> float:
    return bind_aggregate(expr, r).total_f()


@dataclass(frozen=True)
class ExecutionResult:
    relation: SampleRelation      # pre-aggregate rows, f bound when aggregated
    aggregate: float | None       # plain sum of f over the rows, if requested


def execute(node: PlanNode, catalog: Catalog, master_seed: int = 0) -> ExecutionResult:
    """Run a plan, with sampling, against the catalog.

    Sampler streams are keyed by (master_seed, per-node seed), so one run is
    reproducible and distinct operators draw independently.
    """

    def rec(n: PlanNode) -> SampleRelation:
        if isinstance(n, Scan):
            if n.table not in catalog:
                raise PlanError(f"unknown table {n.table!r}")
            return scan(catalog[n.table])
        if isinstance(n, Select):
            return select(n.predicate, rec(n.child))
        if isinstance(n, Join):
            return join(n.condition, rec(n.left), rec(n.right))
        if isinstance(n, Cross):
            return cross(rec(n.left), rec(n.right))
        if isinstance(n, UnionDedup):
            return union_dedup(rec(n.left), rec(n.right))
        if isinstance(n, Sample):
            child = rec(n.child)
            m = n.method
            if isinstance(m, BernoulliSpec):
                return samplers.bernoulli_sample(
                    child, m.p, samplers.generator(master_seed, m.seed))
            if isinstance(m, WorSpec):
                return samplers.wor_sample(
                    child, m.n, samplers.generator(master_seed, m.seed))
            if isinstance(m, LineageBernoulliSpec):
                dims = {
                    name: (p, samplers.derive_seed(master_seed, seed))
                    for name, p, seed in m.dims
                }
                return samplers.lineage_bernoulli(child, dims)
            raise PlanError(f"unknown sampler spec {type(m).__name__}")
        if isinstance(n, GusQuasi):
            raise PlanError("parameter-only sampling nodes cannot be executed")
        if isinstance(n, SumAggregate):
            raise PlanError("sum aggregate may appear only at the plan root")
        raise PlanError(f"unsupported plan node {type(n).__name__}")

    if isinstance(node, SumAggregate):
        relation = bind_aggregate(node.expr, rec(node.child))
        return ExecutionResult(relation, relation.total_f())
    return ExecutionResult(rec(node), None)


def execute_full(node: PlanNode, catalog: Catalog) -> ExecutionResult:
    """Run the sampling-free version of a plan (full-data ground truth)."""
    from .plan import strip_sampling

    return execute(strip_sampling(node), catalog)
