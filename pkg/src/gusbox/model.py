"""Core domain types: lineage schemas, subset masks, sampling parameter
tables, and lineage-carrying relations.

A lineage schema is the canonically ordered set of base relations feeding an
expression. Subsets of it are represented as bitmasks over the canonical
order, so a parameter table indexed "per subset" is a dense array of length
2**n. A sampling process over such a schema is summarized by the pair
``(a, b)``: ``a`` is the inclusion probability of any single tuple, and
``b[T]`` is the joint inclusion probability of two tuples that agree exactly
on the base relations in subset ``T``. Two tuples agreeing everywhere are the
same tuple, which forces ``b[full] == a``; every constructor in this package
maintains that identity bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

from .errors import SchemaError, SelfJoinError

Lineage = tuple  # vector of base-tuple ids, positionally aligned to a schema


def popcount(mask: int) -> int:
    return mask.bit_count()


def submasks(mask: int):
    """Yield every subset of ``mask``, including 0 and ``mask`` itself."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


@dataclass(frozen=True)
class LineageSchema:
    """Canonically ordered tuple of distinct base-relation names."""

    relations: tuple[str, ...]

    def __post_init__(self):
        names = self.relations
        if any(not n for n in names):
            raise SchemaError("relation names must be non-empty")
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate relation names: {names}")
        if tuple(sorted(names)) != names:
            raise SchemaError(f"relation names must be sorted: {names}")

    @classmethod
    def of(cls, names: Iterable[str]) -> "LineageSchema":
        return cls(tuple(sorted(set(names))))

    @property
    def n(self) -> int:
        return len(self.relations)

    @property
    def full_mask(self) -> int:
        return (1 << len(self.relations)) - 1

    @property
    def num_subsets(self) -> int:
        return 1 << len(self.relations)

    def index(self, name: str) -> int:
        try:
            return self.relations.index(name)
        except ValueError:
            raise SchemaError(f"unknown relation {name!r} in schema {self.relations}") from None

    def mask_of(self, names: Iterable[str]) -> int:
        mask = 0
        for name in names:
            mask |= 1 << self.index(name)
        return mask

    def names_of(self, mask: int) -> tuple[str, ...]:
        if not 0 <= mask <= self.full_mask:
            raise SchemaError(f"mask {mask} out of range for schema of size {self.n}")
        return tuple(r for i, r in enumerate(self.relations) if mask >> i & 1)

    def subset_key(self, mask: int) -> str:
        """Serialization key for a subset: names concatenated in canonical
        order, empty string for the empty set."""
        return "".join(self.names_of(mask))

    def mask_of_key(self, key: str) -> int:
        """Inverse of :meth:`subset_key`, resolved by backtracking so that
        names that are prefixes of other names still parse."""

        def walk(pos: int, rel_idx: int) -> int | None:
            if pos == len(key):
                return 0
            for i in range(rel_idx, self.n):
                name = self.relations[i]
                if key.startswith(name, pos):
                    rest = walk(pos + len(name), i + 1)
                    if rest is not None:
                        return rest | (1 << i)
            return None

        mask = walk(0, 0)
        if mask is None:
            raise SchemaError(f"subset key {key!r} does not match schema {self.relations}")
        return mask

    def is_subschema_of(self, wider: "LineageSchema") -> bool:
        return set(self.relations) <= set(wider.relations)

    def merge_disjoint(self, other: "LineageSchema") -> "LineageSchema":
        overlap = set(self.relations) & set(other.relations)
        if overlap:
            raise SelfJoinError(
                f"lineage schemas overlap on {sorted(overlap)}; expressions over "
                "a shared base relation cannot be combined"
            )
        return LineageSchema.of(self.relations + other.relations)


def common_lineage(t: Lineage, u: Lineage) -> int:
    """Mask of positions where two lineage vectors carry the same id."""
    if len(t) != len(u):
        raise SchemaError(f"lineage length mismatch: {len(t)} vs {len(u)}")
    mask = 0
    for k, (a, b) in enumerate(zip(t, u)):
        if a == b:
            mask |= 1 << k
    return mask


@dataclass(frozen=True)
class GusParams:
    """Inclusion-probability summary of a uniform sampling process.

    ``b`` is dense over all 2**n subset masks of ``schema``. Entries live in
    [0, 1] and ``b[full_mask] == a`` exactly.
    """

    schema: LineageSchema
    a: float
    b: tuple[float, ...]

    def __post_init__(self):
        if len(self.b) != self.schema.num_subsets:
            raise SchemaError(
                f"b table has {len(self.b)} entries, schema needs {self.schema.num_subsets}"
            )
        if not 0.0 <= self.a <= 1.0:
            raise SchemaError(f"a = {self.a} outside [0, 1]")
        for mask, value in enumerate(self.b):
            if not 0.0 <= value <= 1.0:
                raise SchemaError(
                    f"b[{self.schema.subset_key(mask) or 'empty'}] = {value} outside [0, 1]"
                )
        if self.b[self.schema.full_mask] != self.a:
            raise SchemaError(
                f"b at the full mask ({self.b[self.schema.full_mask]}) must equal a ({self.a})"
            )

    def b_of(self, mask: int) -> float:
        return self.b[mask]

    @property
    def is_identity(self) -> bool:
        return self.a == 1.0 and all(v == 1.0 for v in self.b)

    @property
    def is_null(self) -> bool:
        return self.a == 0.0 and all(v == 0.0 for v in self.b)

    def to_json_dict(self) -> dict:
        keys = [self.schema.subset_key(m) for m in range(self.schema.num_subsets)]
        if len(set(keys)) != len(keys):
            raise SchemaError(
                f"schema {self.schema.relations} has ambiguous subset keys; "
                "rename relations to serialize"
            )
        return {
            "schema": list(self.schema.relations),
            "a": self.a,
            "b": {k: v for k, v in zip(keys, self.b)},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, doc: Mapping) -> "GusParams":
        schema = LineageSchema(tuple(doc["schema"]))
        table = doc["b"]
        if len(table) != schema.num_subsets:
            raise SchemaError(
                f"b table has {len(table)} keys, schema needs {schema.num_subsets}"
            )
        b = [0.0] * schema.num_subsets
        for key, value in table.items():
            b[schema.mask_of_key(key)] = value
        return cls(schema, doc["a"], tuple(b))

    @classmethod
    def from_json(cls, text: str) -> "GusParams":
        return cls.from_json_dict(json.loads(text))


def extend_schema(g: GusParams, wider: LineageSchema) -> GusParams:
    """Re-index ``g`` over a wider schema.

    A process that never filters a relation keeps both-tuple probabilities
    unchanged whether or not the two tuples agree there, so the widened table
    reads ``b[T] = g.b[T & original]``.
    """
    if not g.schema.is_subschema_of(wider):
        raise SchemaError(f"schema {g.schema.relations} is not contained in {wider.relations}")
    if g.schema == wider:
        return g
    positions = [wider.index(r) for r in g.schema.relations]
    b = []
    for wide_mask in range(wider.num_subsets):
        narrow = 0
        for i, pos in enumerate(positions):
            if wide_mask >> pos & 1:
                narrow |= 1 << i
        b.append(g.b[narrow])
    b[wider.full_mask] = g.a
    return GusParams(wider, g.a, tuple(b))


class Row(NamedTuple):
    """One tuple of a lineage-carrying relation."""

    values: tuple
    lineage: Lineage
    f: float


@dataclass(frozen=True)
class SampleRelation:
    """Bag of rows with per-row lineage and an aggregate value ``f``.

    Duplicate-free by full lineage vector: sampling here is filtering, never
    replication, so a lineage identifies a row.
    """

    schema: LineageSchema
    columns: tuple[str, ...]
    column_types: tuple[str, ...]
    rows: tuple[Row, ...]

    def __post_init__(self):
        if len(self.columns) != len(self.column_types):
            raise SchemaError("columns and column_types must align")
        n = self.schema.n
        seen = set()
        for row in self.rows:
            if len(row.lineage) != n:
                raise SchemaError(
                    f"lineage {row.lineage} has length {len(row.lineage)}, schema has {n}"
                )
            if row.lineage in seen:
                raise SchemaError(f"duplicate lineage vector {row.lineage}")
            seen.add(row.lineage)

    def __len__(self) -> int:
        return len(self.rows)

    def column_index(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise SchemaError(f"unknown column {name!r}; have {self.columns}") from None

    def with_rows(self, rows: Sequence[Row]) -> "SampleRelation":
        return SampleRelation(self.schema, self.columns, self.column_types, tuple(rows))

    def total_f(self) -> float:
        return sum(row.f for row in sorted(self.rows, key=lambda r: r.lineage))
