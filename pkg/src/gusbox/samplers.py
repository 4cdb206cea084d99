"""Executable randomized filters.

All samplers are deterministic functions of (input, parameters, seed).
Stream-based samplers draw from a PCG64 generator; the lineage-keyed
Bernoulli derives each decision from a SplitMix-style 64-bit hash of
(seed, base-tuple id) so a base tuple receives one decision shared across
every result row that contains it.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .errors import SampleSizeError, SchemaError
from .model import SampleRelation

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(x: int) -> int:
    """SplitMix64 finalizer; full avalanche on 64-bit inputs."""
    x &= _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def keyed_unit(seed: int, key: int) -> float:
    """Deterministic pseudo-random number in [0, 1) for (seed, key)."""
    return mix64(seed * _GOLDEN + key) / 2.0**64


def derive_seed(master: int, node_seed: int) -> int:
    """Combine a run-level seed with a per-operator seed."""
    return mix64((master & _MASK64) * _GOLDEN ^ mix64(node_seed))


def generator(master: int, node_seed: int) -> np.random.Generator:
    """PCG64 stream for one sampler invocation, keyed by both seeds."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((master, node_seed))))


def bernoulli_sample(r: SampleRelation, p: float, rng: np.random.Generator) -> SampleRelation:
    """Keep each row independently with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise SchemaError(f"Bernoulli probability {p} outside [0, 1]")
    if not r.rows:
        return r
    draws = rng.random(len(r.rows))
    return r.with_rows([row for row, u in zip(r.rows, draws) if u < p])


def wor_sample(r: SampleRelation, n: int, rng: np.random.Generator) -> SampleRelation:
    """Uniform fixed-size subset via a partial Fisher-Yates shuffle.

    The selected rows keep their input order.
    """
    m = len(r.rows)
    if n > m:
        raise SampleSizeError(f"cannot draw {n} rows from a relation of {m}")
    idx = list(range(m))
    for i in range(n):
        j = int(rng.integers(i, m))
        idx[i], idx[j] = idx[j], idx[i]
    chosen = sorted(idx[:n])
    return r.with_rows([r.rows[i] for i in chosen])


def lineage_bernoulli(r: SampleRelation, dims: Mapping[str, tuple[float, int]]) -> SampleRelation:
    """Keep a row iff every covered relation's base-tuple id hashes under
    its threshold. Decisions are per base tuple, not per row."""
    positions = []
    for name, (p, seed) in sorted(dims.items()):
        positions.append((r.schema.index(name), p, seed))
    kept = []
    for row in r.rows:
        ok = True
        for pos, p, seed in positions:
            if keyed_unit(seed, row.lineage[pos]) >= p:
                ok = False
                break
        if ok:
            kept.append(row)
    return r.with_rows(kept)
