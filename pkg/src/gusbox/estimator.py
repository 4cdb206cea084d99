"""The statistical estimator: consumes the sampled rows (lineage plus
per-row aggregate values) and the top-level parameter table, produces the
estimate, variance terms, and confidence intervals.

The estimate is ``X = (1/a) * sum of f`` over the sample. Its variance
decomposes into data-dependent terms ``y[S]`` (group by the S part of the
lineage, sum f within groups, square, sum over groups) weighted by
coefficients derived from the parameter table. The sample versions ``Y[S]``
are biased; an unbiased correction runs top-down from the full mask:

    yhat[full] = Y[full] / b[full]
    yhat[S] = (Y[S] - sum over non-empty T <= complement(S) of
               k(S, T) * yhat[S | T]) / b[S]
    k(S, T) = sum over U <= T of (-1)**|T - U| * b[S | U]

which inverts the expectation E[Y[S]] = sum over T of k(S, T) * y[S | T].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Mapping, Optional, Sequence

from . import samplers
from .algebra import c_coefficients, compact, gus_of_lineage_bernoulli
from .errors import DegenerateSamplingError, NotIdentifiableError, SchemaError
from .model import GusParams, SampleRelation, popcount, submasks

_NORMAL = NormalDist()


def estimate_sum(sample: SampleRelation, a: float) -> float:
    """Scale the sample total by the single-tuple inclusion probability."""
    if a <= 0.0:
        raise DegenerateSamplingError("inclusion probability a must be positive")
    return sample.total_f() / a


def y_sample_terms(sample: SampleRelation) -> dict[int, float]:
    """Per-subset squared group totals of f, grouped by the subset part of
    the lineage. Streaming implementation: one hash group-by per subset.

    Accumulation order is canonical (rows by full lineage, groups by
    projected key) so independent implementations agree bit for bit.
    """
    n = sample.schema.n
    rows = sorted(((r.lineage, r.f) for r in sample.rows), key=lambda x: x[0])
    out: dict[int, float] = {}
    for s in range(1 << n):
        positions = [i for i in range(n) if s >> i & 1]
        groups: dict[tuple, float] = {}
        for lineage, f in rows:
            key = tuple(lineage[i] for i in positions)
            groups[key] = groups.get(key, 0.0) + f
        total = 0.0
        for key in sorted(groups):
            g = groups[key]
            total += g * g
        out[s] = total
    return out


def recursion_coefficient(g: GusParams, s: int, t: int) -> float:
    """Weight of y[s | t] in the expectation of the sample term Y[s]."""
    total = 0.0
    for u in submasks(t):
        term = g.b[s | u]
        if popcount(t ^ u) & 1:
            total -= term
        else:
            total += term
    return total


def y_unbiased(y_sample: Mapping[int, float], g: GusParams) -> dict[int, float]:
    """Unbiased estimates of the full-data y terms from sample terms."""
    n = g.schema.n
    full = g.schema.full_mask
    for s in range(1 << n):
        if g.b[s] <= 0.0:
            raise NotIdentifiableError(
                f"pair inclusion probability is 0 for subset "
                f"{g.schema.subset_key(s) or 'empty'}; its variance term cannot "
                "be estimated from this sample"
            )
    yhat: dict[int, float] = {full: y_sample[full] / g.b[full]}
    for s in sorted(range(1 << n), key=popcount, reverse=True):
        if s == full:
            continue
        complement = full ^ s
        acc = y_sample[s]
        for t in submasks(complement):
            if t == 0:
                continue
            acc -= recursion_coefficient(g, s, t) * yhat[s | t]
        yhat[s] = acc / g.b[s]
    return yhat


def variance_estimate(y_hat: Mapping[int, float], c_table: Mapping[int, float],
                      a: float, diagnostics: Optional[list] = None) -> float:
    """Plug the (estimated or exact) y terms into the variance formula,
    clamping a negative result to 0."""
    a2 = a * a
    terms = [c_table[s] / a2 * y_hat[s] for s in sorted(c_table)]
    raw = math.fsum(terms) - y_hat[0]
    if raw < 0.0:
        if diagnostics is not None:
            diagnostics.append(
                f"variance estimate {raw:.6g} clamped to 0; the sample is too "
                "small to pin the variance terms down"
            )
        return 0.0
    return raw


def _normal_multiplier(level: float) -> float:
    if level == 0.95:
        return 1.96
    return _NORMAL.inv_cdf((1.0 + level) / 2.0)


def _chebyshev_multiplier(level: float) -> float:
    if level == 0.95:
        return 4.47
    return 1.0 / math.sqrt(1.0 - level)


def confidence_interval(mu: float, sigma: float, method: str,
                        level: float = 0.95) -> tuple[float, float]:
    """Two-sided interval around mu: normal multipliers if the estimate is
    assumed bell-shaped, distribution-free Chebyshev multipliers otherwise."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence level {level} outside (0, 1)")
    if sigma < 0.0:
        raise ValueError("sigma must be non-negative")
    if method == "normal":
        m = _normal_multiplier(level)
    elif method == "chebyshev":
        m = _chebyshev_multiplier(level)
    else:
        raise ValueError(f"unknown interval method {method!r}")
    return (mu - m * sigma, mu + m * sigma)


def quantile_bounds(mu: float, sigma: float,
                    quantiles: Sequence[float]) -> list[tuple[float, float]]:
    """Normal-approximation quantiles of the estimate's distribution."""
    out = []
    for q in quantiles:
        if not 0.0 < q < 1.0:
            raise ValueError(f"quantile {q} outside (0, 1)")
        out.append((q, mu + _NORMAL.inv_cdf(q) * sigma))
    return out


@dataclass
class EstimateReport:
    """Everything the estimator knows about one run."""

    estimate: float
    a: float
    gus: GusParams
    y_sample: dict[int, float]
    y_hat: dict[int, float]
    c_table: dict[int, float]
    variance_hat: float
    ci_normal: tuple[float, float]
    ci_chebyshev: tuple[float, float]
    quantile_requests: list[tuple[float, float]]
    diagnostics: list[str] = field(default_factory=list)
    sample_rows: int = 0
    subsample_rows: Optional[int] = None
    subsample_gus: Optional[GusParams] = None

    @property
    def sigma_hat(self) -> float:
        return math.sqrt(self.variance_hat)

    def _keyed(self, table: Mapping[int, float]) -> dict[str, float]:
        schema = self.gus.schema
        return {schema.subset_key(s): table[s] for s in sorted(table)}

    def to_json_dict(self) -> dict:
        doc = {
            "estimate": self.estimate,
            "a": self.a,
            "gus": self.gus.to_json_dict(),
            "ySample": self._keyed(self.y_sample),
            "yHat": self._keyed(self.y_hat),
            "cTable": self._keyed(self.c_table),
            "varianceHat": self.variance_hat,
            "ciNormal": list(self.ci_normal),
            "ciChebyshev": list(self.ci_chebyshev),
            "quantileRequests": [[q, v] for q, v in self.quantile_requests],
            "sampleRows": self.sample_rows,
            "diagnostics": list(self.diagnostics),
        }
        if self.subsample_rows is not None:
            doc["subsample"] = {
                "rows": self.subsample_rows,
                "gus": self.subsample_gus.to_json_dict(),
            }
        return doc


def analyze(sample: SampleRelation, gus: GusParams,
            quantiles: Sequence[float] = (), level: float = 0.95) -> EstimateReport:
    """Full estimation pipeline on a sample whose f values are bound."""
    if sample.schema != gus.schema:
        raise SchemaError(
            f"sample schema {sample.schema.relations} does not match parameter "
            f"schema {gus.schema.relations}"
        )
    diagnostics: list[str] = []
    estimate = estimate_sum(sample, gus.a)
    y_s = y_sample_terms(sample)
    y_hat = y_unbiased(y_s, gus)
    c_table = c_coefficients(gus)
    if not sample.rows:
        diagnostics.append("empty sample: estimate and variance default to 0")
    variance = variance_estimate(y_hat, c_table, gus.a, diagnostics)
    sigma = math.sqrt(variance)
    return EstimateReport(
        estimate=estimate,
        a=gus.a,
        gus=gus,
        y_sample=y_s,
        y_hat=y_hat,
        c_table=c_table,
        variance_hat=variance,
        ci_normal=confidence_interval(estimate, sigma, "normal", level),
        ci_chebyshev=confidence_interval(estimate, sigma, "chebyshev", level),
        quantile_requests=quantile_bounds(estimate, sigma, quantiles),
        diagnostics=diagnostics,
        sample_rows=len(sample.rows),
    )


def subsample_variance(sample: SampleRelation, gus: GusParams,
                       dims: Mapping[str, tuple[float, int]],
                       quantiles: Sequence[float] = (),
                       level: float = 0.95) -> EstimateReport:
    """Estimate from the full sample, but pin the variance terms down from a
    lineage-keyed sub-sample of it.

    The sub-sample is itself a uniform sample of the full data, with
    parameters equal to the stack of the original table and the keyed
    filter's table, so the same unbiased correction applies with the stacked
    parameters. The final variance still uses the original table's
    coefficients because the estimate comes from the full sample.
    """
    if sample.schema != gus.schema:
        raise SchemaError(
            f"sample schema {sample.schema.relations} does not match parameter "
            f"schema {gus.schema.relations}"
        )
    diagnostics: list[str] = []
    estimate = estimate_sum(sample, gus.a)
    sub = samplers.lineage_bernoulli(sample, dims)
    g_sub = compact(
        gus, gus_of_lineage_bernoulli({k: p for k, (p, _) in dims.items()}, gus.schema))
    y_s = y_sample_terms(sub)
    y_hat = y_unbiased(y_s, g_sub)
    c_table = c_coefficients(gus)
    if not sample.rows:
        diagnostics.append("empty sample: estimate and variance default to 0")
    diagnostics.append(
        f"variance terms estimated from a {len(sub.rows)}-row sub-sample "
        f"of {len(sample.rows)} sampled rows"
    )
    variance = variance_estimate(y_hat, c_table, gus.a, diagnostics)
    sigma = math.sqrt(variance)
    return EstimateReport(
        estimate=estimate,
        a=gus.a,
        gus=gus,
        y_sample=y_s,
        y_hat=y_hat,
        c_table=c_table,
        variance_hat=variance,
        ci_normal=confidence_interval(estimate, sigma, "normal", level),
        ci_chebyshev=confidence_interval(estimate, sigma, "chebyshev", level),
        quantile_requests=quantile_bounds(estimate, sigma, quantiles),
        diagnostics=diagnostics,
        sample_rows=len(sample.rows),
        subsample_rows=len(sub.rows),
        subsample_gus=g_sub,
    )
