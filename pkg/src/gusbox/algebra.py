"""Algebra over sampling parameter tables, and the plan rewriter that
reduces any supported plan to one relational subtree under a single
parameter table.

The merge rules:

* ``join_merge``/``compose`` multiply tables across disjoint schemas:
  ``a = a1*a2`` and ``b[T] = b1[T & L1] * b2[T & L2]``.
* ``compact`` stacks two filters over the same schema: ``a = a1*a2``,
  ``b[T] = b1[T] * b2[T]``.
* ``union_merge`` combines two independent samples of the same relation:
  ``a = a1 + a2 - a1*a2`` and ``b[T] = 2a - 1 + (1 - 2*a1 + b1[T]) *
  (1 - 2*a2 + b2[T])`` (the product of the two "neither tuple kept"
  probabilities, re-expressed).

The variance coefficients are the alternating subset sums
``c[S] = sum over T <= S of (-1)**|S - T| * b[T]``; with them the estimator
variance is ``sum_S c[S]/a**2 * y[S] - y[empty]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

from .errors import PlanError, SampleSizeError, SchemaError
from .model import GusParams, LineageSchema, extend_schema, popcount, submasks
from .plan import (
    BernoulliSpec,
    Cross,
    GusQuasi,
    Join,
    LineageBernoulliSpec,
    PlanNode,
    Sample,
    Scan,
    Select,
    SumAggregate,
    UnionDedup,
    WorSpec,
    contains_sampling,
    lineage_schema_of,
)


def identity_gus(schema: LineageSchema) -> GusParams:
    """The do-nothing filter: insertable anywhere without changing anything."""
    return GusParams(schema, 1.0, (1.0,) * schema.num_subsets)


def null_gus(schema: LineageSchema) -> GusParams:
    """The filter that blocks everything; the additive null of the algebra."""
    return GusParams(schema, 0.0, (0.0,) * schema.num_subsets)


def row_bernoulli_gus(p: float, schema: LineageSchema) -> GusParams:
    """Per-row coin flips over a relation with the given lineage schema.

    Distinct rows get independent decisions whatever lineage they share,
    so every off-full entry is p**2.
    """
    if not 0.0 <= p <= 1.0:
        raise SchemaError(f"probability {p} outside [0, 1]")
    b = [p * p] * schema.num_subsets
    b[schema.full_mask] = p
    return GusParams(schema, p, tuple(b))


def row_wor_gus(n: int, N: int, schema: LineageSchema) -> GusParams:
    """Uniform fixed-size choice of n rows out of N."""
    if N <= 0:
        raise SampleSizeError(f"population size {N} must be positive")
    if not 1 <= n <= N:
        raise SampleSizeError(f"sample size {n} outside [1, {N}]")
    a = n / N
    pair = n * (n - 1) / (N * (N - 1)) if N > 1 else a
    b = [pair] * schema.num_subsets
    b[schema.full_mask] = a
    return GusParams(schema, a, tuple(b))


def gus_of_bernoulli(p: float, relation: str) -> GusParams:
    return row_bernoulli_gus(p, LineageSchema.of([relation]))


def gus_of_wor(n: int, N: int, relation: str) -> GusParams:
    return row_wor_gus(n, N, LineageSchema.of([relation]))


def _product_merge(g1: GusParams, g2: GusParams) -> GusParams:
    merged = g1.schema.merge_disjoint(g2.schema)
    mask1 = merged.mask_of(g1.schema.relations)
    mask2 = merged.mask_of(g2.schema.relations)
    pos1 = {merged.index(r): i for i, r in enumerate(g1.schema.relations)}
    pos2 = {merged.index(r): i for i, r in enumerate(g2.schema.relations)}

    def project(mask: int, positions: dict) -> int:
        out = 0
        for wide, narrow in positions.items():
            if mask >> wide & 1:
                out |= 1 << narrow
        return out

    a = g1.a * g2.a
    b = []
    for mask in range(merged.num_subsets):
        b.append(g1.b[project(mask & mask1, pos1)] * g2.b[project(mask & mask2, pos2)])
    b[merged.full_mask] = a
    return GusParams(merged, a, tuple(b))


def join_merge(g1: GusParams, g2: GusParams) -> GusParams:
    """Single table covering both sides of a join over disjoint schemas."""
    return _product_merge(g1, g2)


def compose(g1: GusParams, g2: GusParams) -> GusParams:
    """Build a multi-dimensional sampler from per-relation pieces; same
    arithmetic as :func:`join_merge`, used before any join exists."""
    return _product_merge(g1, g2)


def compact(g1: GusParams, g2: GusParams) -> GusParams:
    """Two independent filters stacked over the same schema."""
    if g1.schema != g2.schema:
        raise SchemaError(
            f"compaction needs identical schemas: {g1.schema.relations} vs {g2.schema.relations}"
        )
    a = g1.a * g2.a
    b = [x * y for x, y in zip(g1.b, g2.b)]
    b[g1.schema.full_mask] = a
    return GusParams(g1.schema, a, tuple(b))


def union_merge(g1: GusParams, g2: GusParams) -> GusParams:
    """Set union (dedup by lineage) of two independent samples of the same
    relation."""
    if g1.schema != g2.schema:
        raise SchemaError(
            f"union needs identical schemas: {g1.schema.relations} vs {g2.schema.relations}"
        )
    # null contributes nothing; skip the formula so the identity is bit-exact
    if g1.is_null:
        return g2
    if g2.is_null:
        return g1
    a = g1.a + g2.a - g1.a * g2.a
    b = [
        2.0 * a - 1.0 + (1.0 - 2.0 * g1.a + x) * (1.0 - 2.0 * g2.a + y)
        for x, y in zip(g1.b, g2.b)
    ]
    b[g1.schema.full_mask] = a
    return GusParams(g1.schema, a, tuple(b))


def gus_of_lineage_bernoulli(dims: Mapping[str, float], schema: LineageSchema) -> GusParams:
    """Parameter table of the lineage-keyed Bernoulli filter: per-relation
    coins composed across dimensions, then widened to the target schema."""
    names = sorted(dims)
    for name in names:
        if name not in schema.relations:
            raise SchemaError(f"dimension {name!r} not in schema {schema.relations}")
    g: Optional[GusParams] = None
    for name in names:
        piece = gus_of_bernoulli(dims[name], name)
        g = piece if g is None else compose(g, piece)
    if g is None:
        return identity_gus(schema)
    return extend_schema(g, schema)


def c_coefficients(g: GusParams) -> dict[int, float]:
    """Alternating subset sums of the pair-inclusion table, one per subset."""
    out = {}
    for s in range(g.schema.num_subsets):
        total = 0.0
        for t in submasks(s):
            term = g.b[t]
            if popcount(s ^ t) & 1:
                total -= term
            else:
                total += term
        out[s] = total
    return out


@dataclass(frozen=True)
class RewriteStep:
    """One applied rewrite, for the --explain trace."""

    rule: str
    note: str
    inputs: tuple[GusParams, ...]
    output: GusParams

    def to_json_dict(self) -> dict:
        return {
            "rule": self.rule,
            "note": self.note,
            "before": [g.to_json_dict() for g in self.inputs],
            "after": self.output.to_json_dict(),
        }


@dataclass(frozen=True)
class NormalizedPlan:
    relational: PlanNode
    gus: GusParams
    trace: tuple[RewriteStep, ...]


def _sampler_note(method) -> str:
    if isinstance(method, BernoulliSpec):
        return f"bernoulli(p={method.p})"
    if isinstance(method, WorSpec):
        return f"wor(n={method.n})"
    if isinstance(method, LineageBernoulliSpec):
        dims = ", ".join(f"{name}={p}" for name, p, _ in method.dims)
        return f"lineage_bernoulli({dims})"
    return type(method).__name__


def normalize_plan(plan: PlanNode, catalog=None) -> NormalizedPlan:
    """Rewrite a plan so all sampling collapses into one parameter table
    over the sampling-free relational plan.

    Fixed-size samplers need ``catalog`` to resolve their full-data input
    size, and may not sit above other samplers (their population size would
    be random). Union sides must compute the same relation once sampling is
    stripped; otherwise single-tuple inclusion would not be uniform and no
    single table can describe the result.
    """
    steps: list[RewriteStep] = []

    def emit(rule, note, inputs, output):
        steps.append(RewriteStep(rule, note, tuple(inputs), output))

    def rec(node: PlanNode) -> tuple[PlanNode, GusParams]:
        if isinstance(node, Scan):
            return node, identity_gus(LineageSchema.of([node.table]))
        if isinstance(node, Select):
            child, g = rec(node.child)
            # selection commutes with the filter; parameters unchanged
            return Select(node.predicate, child), g
        if isinstance(node, (Join, Cross)):
            lnode, gl = rec(node.left)
            rnode, gr = rec(node.right)
            merged = join_merge(gl, gr)
            if gl.is_identity and not gr.is_identity:
                emit("identity_gus", f"identity over {gl.schema.relations}", (), gl)
            if gr.is_identity and not gl.is_identity:
                emit("identity_gus", f"identity over {gr.schema.relations}", (), gr)
            if not (gl.is_identity and gr.is_identity):
                emit("join_gus_merge", "merge across join", (gl, gr), merged)
            if isinstance(node, Join):
                return Join(node.condition, lnode, rnode), merged
            return Cross(lnode, rnode), merged
        if isinstance(node, UnionDedup):
            lnode, gl = rec(node.left)
            rnode, gr = rec(node.right)
            if lnode != rnode:
                raise PlanError(
                    "union sides must compute the same relation for the result "
                    "to stay uniformly sampled; rewrite the plan so both sides "
                    "share one relational subtree"
                )
            merged = union_merge(gl, gr)
            if not (gl.is_identity and gr.is_identity):
                emit("union_gus_merge", "merge across union", (gl, gr), merged)
            return UnionDedup(lnode, rnode), merged
        if isinstance(node, Sample):
            child, g_child = rec(node.child)
            schema = lineage_schema_of(child)
            method = node.method
            if isinstance(method, BernoulliSpec):
                g_s = row_bernoulli_gus(method.p, schema)
            elif isinstance(method, WorSpec):
                if contains_sampling(node.child):
                    raise PlanError(
                        "fixed-size sampling over an already randomized input is "
                        "not analyzable (its population size is random)"
                    )
                if catalog is None:
                    raise PlanError(
                        "fixed-size sampling needs a catalog to resolve its input size"
                    )
                from .engine import execute  # deferred: engine imports plan types

                population = len(execute(child, catalog).relation)
                g_s = row_wor_gus(method.n, population, schema)
            elif isinstance(method, LineageBernoulliSpec):
                g_s = gus_of_lineage_bernoulli(
                    {name: p for name, p, _ in method.dims}, schema)
            else:
                raise PlanError(f"unknown sampler spec {type(method).__name__}")
            emit("sampler_to_gus", _sampler_note(method), (), g_s)
            if g_child.is_identity:
                return child, g_s
            merged = compact(g_s, g_child)
            emit("gus_compact", "fuse stacked filters", (g_s, g_child), merged)
            return child, merged
        if isinstance(node, GusQuasi):
            child, g_child = rec(node.child)
            schema = lineage_schema_of(child)
            g_s = extend_schema(node.params, schema)
            emit("sampler_to_gus", "explicit parameter table", (), g_s)
            if g_child.is_identity:
                return child, g_s
            merged = compact(g_s, g_child)
            emit("gus_compact", "fuse stacked filters", (g_s, g_child), merged)
            return child, merged
        if isinstance(node, SumAggregate):
            raise PlanError("sum aggregate may appear only at the plan root")
        raise PlanError(f"unsupported plan node {type(node).__name__}")

    if isinstance(plan, SumAggregate):
        child, gus = rec(plan.child)
        return NormalizedPlan(SumAggregate(plan.expr, child), gus, tuple(steps))
    child, gus = rec(plan)
    return NormalizedPlan(child, gus, tuple(steps))
