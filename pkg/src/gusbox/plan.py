"""Query-plan tree: relational operators with sampling operators
interspersed, plus the predicate and sampler descriptions they carry.

Plans are immutable; rewriting produces new trees. A sum aggregate may
appear once, at the root. Analysis-only parameter nodes (:class:`GusQuasi`)
are produced by the rewriter and are not executable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Union

from .errors import PlanError, SchemaError, SelfJoinError
from .model import GusParams, LineageSchema

_CMP_OPS = ("=", "!=", "<", "<=", ">", ">=")


@dataclass(frozen=True)
class Comparison:
    """One predicate atom: column vs constant, or column = column."""

    col: str
    op: str
    value: Union[int, float, str, None] = None
    other_col: Union[str, None] = None

    def __post_init__(self):
        if self.op not in _CMP_OPS:
            raise PlanError(f"unknown comparison operator {self.op!r}")
        if (self.value is None) == (self.other_col is None):
            raise PlanError("comparison needs exactly one of a constant or a second column")
        if self.other_col is not None and self.op != "=":
            raise PlanError("column-to-column comparisons support '=' only")


@dataclass(frozen=True)
class Predicate:
    """Conjunction of comparison atoms; empty conjunction is always true."""

    atoms: tuple[Comparison, ...] = ()

    def conjoin(self, other: "Predicate") -> "Predicate":
        return Predicate(self.atoms + other.atoms)


ALWAYS_TRUE = Predicate()


@dataclass(frozen=True)
class JoinSpec:
    """Equality pairs (left column, right column) plus an optional residual
    predicate evaluated on the concatenated row."""

    equi: tuple[tuple[str, str], ...] = ()
    residual: Predicate = ALWAYS_TRUE


@dataclass(frozen=True)
class BernoulliSpec:
    p: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise PlanError(f"Bernoulli probability {self.p} outside [0, 1]")
        if self.seed < 0:
            raise PlanError("seeds must be non-negative")


@dataclass(frozen=True)
class WorSpec:
    n: int
    seed: int = 0

    def __post_init__(self):
        if self.n < 0:
            raise PlanError(f"sample size {self.n} must be >= 0")
        if self.seed < 0:
            raise PlanError("seeds must be non-negative")


@dataclass(frozen=True)
class LineageBernoulliSpec:
    """Per-relation keep probabilities decided by a keyed hash of the
    relation's base-tuple id, so a base tuple gets one decision shared by
    every result row it contributes to."""

    dims: tuple[tuple[str, float, int], ...]  # (relation, p, seed), sorted

    def __post_init__(self):
        names = [d[0] for d in self.dims]
        if names != sorted(names) or len(set(names)) != len(names):
            raise PlanError("lineage-Bernoulli dimensions must be sorted and distinct")
        for name, p, seed in self.dims:
            if not 0.0 <= p <= 1.0:
                raise PlanError(f"probability {p} for {name!r} outside [0, 1]")
            if seed < 0:
                raise PlanError("seeds must be non-negative")

    @classmethod
    def of(cls, dims: Mapping[str, tuple[float, int]]) -> "LineageBernoulliSpec":
        return cls(tuple((name, p, seed) for name, (p, seed) in sorted(dims.items())))


SamplerSpec = Union[BernoulliSpec, WorSpec, LineageBernoulliSpec]


class PlanNode:
    """Base class; concrete nodes are frozen dataclasses."""

    __slots__ = ()


@dataclass(frozen=True)
class Scan(PlanNode):
    table: str


@dataclass(frozen=True)
class Select(PlanNode):
    predicate: Predicate
    child: PlanNode


@dataclass(frozen=True)
class Join(PlanNode):
    condition: JoinSpec
    left: PlanNode
    right: PlanNode


@dataclass(frozen=True)
class Cross(PlanNode):
    left: PlanNode
    right: PlanNode


@dataclass(frozen=True)
class UnionDedup(PlanNode):
    left: PlanNode
    right: PlanNode


@dataclass(frozen=True)
class Sample(PlanNode):
    method: SamplerSpec
    child: PlanNode


@dataclass(frozen=True)
class GusQuasi(PlanNode):
    """Analysis-only marker carrying sampling parameters; never executed."""

    params: GusParams
    child: PlanNode


@dataclass(frozen=True)
class SumAggregate(PlanNode):
    expr: str
    child: PlanNode


def lineage_schema_of(node: PlanNode) -> LineageSchema:
    """Lineage schema of a node's output, validating join disjointness and
    union schema agreement along the way."""
    if isinstance(node, Scan):
        return LineageSchema.of([node.table])
    if isinstance(node, (Select, Sample, GusQuasi, SumAggregate)):
        return lineage_schema_of(node.child)
    if isinstance(node, (Join, Cross)):
        left = lineage_schema_of(node.left)
        right = lineage_schema_of(node.right)
        overlap = set(left.relations) & set(right.relations)
        if overlap:
            raise SelfJoinError(
                f"join sides share base relation(s) {sorted(overlap)}; self-joins are unsupported"
            )
        return left.merge_disjoint(right)
    if isinstance(node, UnionDedup):
        left = lineage_schema_of(node.left)
        right = lineage_schema_of(node.right)
        if left != right:
            raise SchemaError(
                f"union sides cover different base relations: {left.relations} vs {right.relations}"
            )
        return left
    raise PlanError(f"unsupported plan node {type(node).__name__}")


def strip_sampling(node: PlanNode) -> PlanNode:
    """The plan with every sampling node removed; what runs on full data."""
    if isinstance(node, Scan):
        return node
    if isinstance(node, Select):
        return Select(node.predicate, strip_sampling(node.child))
    if isinstance(node, Join):
        return Join(node.condition, strip_sampling(node.left), strip_sampling(node.right))
    if isinstance(node, Cross):
        return Cross(strip_sampling(node.left), strip_sampling(node.right))
    if isinstance(node, UnionDedup):
        return UnionDedup(strip_sampling(node.left), strip_sampling(node.right))
    if isinstance(node, (Sample, GusQuasi)):
        return strip_sampling(node.child)
    if isinstance(node, SumAggregate):
        return SumAggregate(node.expr, strip_sampling(node.child))
    raise PlanError(f"unsupported plan node {type(node).__name__}")


def contains_sampling(node: PlanNode) -> bool:
    if isinstance(node, (Sample, GusQuasi)):
        return True
    if isinstance(node, Scan):
        return False
    if isinstance(node, (Select, SumAggregate)):
        return contains_sampling(node.child)
    if isinstance(node, (Join, Cross, UnionDedup)):
        return contains_sampling(node.left) or contains_sampling(node.right)
    raise PlanError(f"unsupported plan node {type(node).__name__}")


def validate_plan(root: PlanNode) -> None:
    """Structural checks: aggregate only at the root, schemas consistent."""

    def no_aggregate(node: PlanNode):
        if isinstance(node, SumAggregate):
            raise PlanError("sum aggregate may appear only at the plan root")
        if isinstance(node, (Select, Sample, GusQuasi)):
            no_aggregate(node.child)
        elif isinstance(node, (Join, Cross, UnionDedup)):
            no_aggregate(node.left)
            no_aggregate(node.right)

    if isinstance(root, SumAggregate):
        no_aggregate(root.child)
    else:
        no_aggregate(root)
    lineage_schema_of(root)
