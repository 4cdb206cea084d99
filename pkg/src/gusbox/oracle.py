"""Ground-truth machinery, independent of the estimator's fast paths.

* exact y terms on the full (unsampled) relational result, via a sort-based
  group-by kept deliberately different from the estimator's hash group-by;
* exact estimator moments by enumerating every sampling configuration of a
  plan, weighting each outcome by its probability;
* seeded Monte Carlo moments and per-tuple inclusion frequencies.

Enumeration and Monte Carlo treat distinct sampling operators as
independent, which matches execution as long as no two lineage-keyed
samplers share a (relation, seed) pair.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping

from . import samplers
from .algebra import normalize_plan
from .engine import (
    Catalog,
    bind_aggregate,
    cross,
    execute,
    execute_full,
    join,
    scan,
    select,
    union_dedup,
)
from .errors import (
    DegenerateSamplingError,
    EnumerationInfeasibleError,
    PlanError,
    SampleSizeError,
)
from .model import GusParams, SampleRelation, common_lineage
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
)

DEFAULT_STATE_BUDGET = 1 << 20


def exact_y_terms(full_result: SampleRelation) -> dict[int, float]:
    """Per-subset squared group totals on the complete data.

    Sort-based: rows are ordered by full lineage, stable-sorted per subset by
    the projected key, and runs of equal keys are folded. The accumulation
    order matches the estimator's hash-based group-by exactly, so the two
    implementations must agree on every bit for identical input.
    """
    n = full_result.schema.n
    rows = sorted(((r.lineage, r.f) for r in full_result.rows), key=lambda x: x[0])
    out: dict[int, float] = {}
    for s in range(1 << n):
        positions = [i for i in range(n) if s >> i & 1]
        projected = sorted(
            ((tuple(lineage[i] for i in positions), f) for lineage, f in rows),
            key=lambda x: x[0],
        )
        total = 0.0
        run_key: object = None
        run_sum = 0.0
        started = False
        for key, f in projected:
            if started and key == run_key:
                run_sum += f
            else:
                if started:
                    total += run_sum * run_sum
                run_key = key
                run_sum = f
                started = True
        if started:
            total += run_sum * run_sum
        out[s] = total
    return out


def _merge_outcomes(outcomes) -> list[tuple[SampleRelation, float]]:
    merged: dict = {}
    for rel, weight in outcomes:
        key = frozenset(row.lineage for row in rel.rows)
        if key in merged:
            merged[key] = (merged[key][0], merged[key][1] + weight)
        else:
            merged[key] = (rel, weight)
    return list(merged.values())


def enumerate_outcomes(node: PlanNode, catalog: Catalog,
                        budget: int) -> list[tuple[SampleRelation, float]]:
    def guard(count: int):
        if count > budget:
            raise EnumerationInfeasibleError(
                f"enumeration would need {count} states, budget is {budget}"
            )

    if isinstance(node, Scan):
        if node.table not in catalog:
            raise PlanError(f"unknown table {node.table!r}")
        return [(scan(catalog[node.table]), 1.0)]
    if isinstance(node, Select):
        child = enumerate_outcomes(node.child, catalog, budget)
        return _merge_outcomes((select(node.predicate, rel), w) for rel, w in child)
    if isinstance(node, (Join, Cross)):
        left = enumerate_outcomes(node.left, catalog, budget)
        right = enumerate_outcomes(node.right, catalog, budget)
        guard(len(left) * len(right))
        if isinstance(node, Join):
            pairs = ((join(node.condition, l, r), wl * wr)
                     for l, wl in left for r, wr in right)
        else:
            pairs = ((cross(l, r), wl * wr) for l, wl in left for r, wr in right)
        return _merge_outcomes(pairs)
    if isinstance(node, UnionDedup):
        left = enumerate_outcomes(node.left, catalog, budget)
        right = enumerate_outcomes(node.right, catalog, budget)
        guard(len(left) * len(right))
        return _merge_outcomes(
            (union_dedup(l, r), wl * wr) for l, wl in left for r, wr in right)
    if isinstance(node, Sample):
        child = enumerate_outcomes(node.child, catalog, budget)
        method = node.method
        out = []
        if isinstance(method, BernoulliSpec):
            p = method.p
            for rel, w in child:
                m = len(rel.rows)
                guard(len(out) + (1 << m))
                for bits in range(1 << m):
                    k = bits.bit_count()
                    weight = w * p**k * (1.0 - p) ** (m - k)
                    if weight == 0.0:
                        continue
                    rows = [row for i, row in enumerate(rel.rows) if bits >> i & 1]
                    out.append((rel.with_rows(rows), weight))
        elif isinstance(method, WorSpec):
            for rel, w in child:
                m = len(rel.rows)
                if method.n > m:
                    raise SampleSizeError(
                        f"cannot draw {method.n} rows from a relation of {m}")
                count = math.comb(m, method.n)
                guard(len(out) + count)
                for chosen in itertools.combinations(range(m), method.n):
                    rows = [rel.rows[i] for i in chosen]
                    out.append((rel.with_rows(rows), w / count))
        elif isinstance(method, LineageBernoulliSpec):
            for rel, w in child:
                positions = [(rel.schema.index(name), p) for name, p, _ in method.dims]
                keys = sorted({(pos, row.lineage[pos]) for row in rel.rows
                               for pos, _ in positions})
                probs = {key: p for pos, p in positions
                         for key in keys if key[0] == pos}
                k = len(keys)
                guard(len(out) + (1 << k))
                for bits in range(1 << k):
                    weight = w
                    kept = set()
                    for i, key in enumerate(keys):
                        if bits >> i & 1:
                            weight *= probs[key]
                            kept.add(key)
                        else:
                            weight *= 1.0 - probs[key]
                    if weight == 0.0:
                        continue
                    rows = [row for row in rel.rows
                            if all((pos, row.lineage[pos]) in kept
                                   for pos, _ in positions)]
                    out.append((rel.with_rows(rows), weight))
        else:
            raise PlanError(f"unknown sampler spec {type(method).__name__}")
        return _merge_outcomes(out)
    if isinstance(node, GusQuasi):
        raise PlanError("parameter-only sampling nodes cannot be enumerated")
    raise PlanError(f"unsupported plan node {type(node).__name__}")


def enumerate_exact_moments(plan: PlanNode, catalog: Catalog,
                            budget: int = DEFAULT_STATE_BUDGET) -> tuple[float, float]:
    """Exact mean and variance of the scaled-sum estimate, by summing over
    every sampling configuration of the plan."""
    if not isinstance(plan, SumAggregate):
        raise PlanError("exact moments need a plan with a sum aggregate at the root")
    a = normalize_plan(plan, catalog).gus.a
    if a <= 0.0:
        raise DegenerateSamplingError("inclusion probability a must be positive")
    outcomes = enumerate_outcomes(plan.child, catalog, budget)
    total_weight = math.fsum(w for _, w in outcomes)
    if abs(total_weight - 1.0) > 1e-9:
        raise AssertionError(f"enumeration weights sum to {total_weight!r}, not 1")
    values = [(bind_aggregate(plan.expr, rel).total_f() / a, w) for rel, w in outcomes]
    mean = math.fsum(x * w for x, w in values)
    variance = math.fsum((x - mean) ** 2 * w for x, w in values)
    return mean, variance


def monte_carlo_moments(plan: PlanNode, catalog: Catalog, trials: int,
                        seed: int) -> tuple[float, float, float]:
    """Seeded sample mean/variance of the estimate, with the standard error
    of the mean. Trial streams derive from (seed, trial index)."""
    if trials < 1:
        raise ValueError("need at least one trial")
    if not isinstance(plan, SumAggregate):
        raise PlanError("estimator moments need a plan with a sum aggregate at the root")
    a = normalize_plan(plan, catalog).gus.a
    if a <= 0.0:
        raise DegenerateSamplingError("inclusion probability a must be positive")
    values = []
    for trial in range(trials):
        master = samplers.derive_seed(seed, trial)
        result = execute(plan, catalog, master_seed=master)
        values.append(result.aggregate / a)
    mean = math.fsum(values) / trials
    if trials > 1:
        variance = math.fsum((x - mean) ** 2 for x in values) / (trials - 1)
    else:
        variance = 0.0
    return mean, variance, math.sqrt(variance / trials)


def inclusion_probabilities(plan: PlanNode, catalog: Catalog, trials: int,
                            seed: int):
    """Empirical single and pairwise inclusion frequencies per lineage of
    the full relational result."""
    if trials < 1:
        raise ValueError("need at least one trial")
    relational = plan.child if isinstance(plan, SumAggregate) else plan
    universe = [row.lineage for row in execute_full(relational, catalog).relation.rows]
    first = {t: 0 for t in universe}
    second = {pair: 0 for pair in itertools.combinations(sorted(universe), 2)}
    for trial in range(trials):
        master = samplers.derive_seed(seed, trial)
        out = execute(relational, catalog, master_seed=master).relation
        present = sorted(row.lineage for row in out.rows)
        for t in present:
            first[t] += 1
        for pair in itertools.combinations(present, 2):
            second[pair] += 1
    return (
        {t: count / trials for t, count in first.items()},
        {pair: count / trials for pair, count in second.items()},
    )


@dataclass(frozen=True)
class BandViolation:
    kind: str
    where: str
    observed: float
    expected: float
    z: float


def compare_inclusion_to_gus(first: Mapping, second: Mapping, gus: GusParams,
                             trials: int, nsigma: float = 5.0):
    """Check empirical inclusion frequencies against a parameter table.

    Returns (violations, worst z-score). A frequency with zero sampling
    noise (expected 0 or 1) must match exactly.
    """
    violations = []
    worst = 0.0

    def check(kind, where, observed, expected):
        nonlocal worst
        sigma = math.sqrt(expected * (1.0 - expected) / trials)
        if sigma == 0.0:
            z = 0.0 if observed == expected else math.inf
        else:
            z = abs(observed - expected) / sigma
        worst = max(worst, z)
        if z > nsigma:
            violations.append(BandViolation(kind, where, observed, expected, z))

    for t, freq in first.items():
        check("first-order", repr(t), freq, gus.a)
    for (t, u), freq in second.items():
        mask = common_lineage(t, u)
        check("second-order", f"{t!r},{u!r}", freq, gus.b[mask])
    return violations, worst
