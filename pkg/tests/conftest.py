"""Shared fixtures: hand-built tables, desk-scale generated data, and the
two reference plan shapes used across the suite."""

from __future__ import annotations

import pytest

from gusbox import (
    BaseTable,
    BernoulliSpec,
    Comparison,
    Join,
    JoinSpec,
    LineageSchema,
    Predicate,
    Row,
    Sample,
    SampleRelation,
    Scan,
    Select,
    SumAggregate,
    WorSpec,
)
from gusbox.datagen import generate_tpch_tiny
from gusbox.ingest import ingest_csv

LINEITEM_TYPES = {
    "l_orderkey": "int64",
    "l_linenumber": "int64",
    "l_partkey": "int64",
    "l_extendedprice": "float64",
    "l_discount": "float64",
    "l_tax": "float64",
}
ORDERS_TYPES = {"o_orderkey": "int64", "o_custkey": "int64", "o_totalprice": "float64"}
CUSTOMER_TYPES = {"c_custkey": "int64", "c_acctbal": "float64"}
PART_TYPES = {"p_partkey": "int64", "p_retailprice": "float64", "p_size": "int64"}

DESK_SCALE = {"l": 300, "o": 75, "c": 20, "p": 30}
DESK_SEED = 7


def lineage_relation(names, entries, columns=(), types=()):
    """Relation with bare lineage and f values: entries are (lineage, f) or
    (lineage, f, values)."""
    schema = LineageSchema.of(names)
    rows = []
    for entry in entries:
        lineage, f = entry[0], entry[1]
        values = entry[2] if len(entry) > 2 else ()
        rows.append(Row(tuple(values), tuple(lineage), float(f)))
    return SampleRelation(schema, tuple(columns), tuple(types), tuple(rows))


def small_join_catalog():
    """Two toy tables with join fanout, small enough to enumerate."""
    l = BaseTable(
        "l", ("l_ok", "l_val"), ("int64", "float64"),
        ids=(10, 11, 12, 13, 14, 15),
        rows=((1, 2.0), (1, 3.0), (2, 5.0), (3, 7.0), (2, 1.5), (3, 4.0)),
    )
    o = BaseTable(
        "o", ("o_ok", "o_w"), ("int64", "float64"),
        ids=(1, 2, 3),
        rows=((1, 1.0), (2, 1.0), (3, 2.0)),
    )
    return {"l": l, "o": o}


def small_join_plan(l_sampler=None, o_sampler=None, expr="l_val*o_w"):
    left = Scan("l")
    right = Scan("o")
    if l_sampler is not None:
        left = Sample(l_sampler, left)
    if o_sampler is not None:
        right = Sample(o_sampler, right)
    return SumAggregate(expr, Join(JoinSpec(equi=(("l_ok", "o_ok"),)), left, right))


def query1_plan(p=0.3, n=25, price=100.0, bern_seed=1, wor_seed=2):
    """Bernoulli on lineitem joined with a fixed-size sample of orders,
    filtered on extended price, summing the discounted tax expression."""
    return SumAggregate(
        "l_discount*(1.0-l_tax)",
        Select(
            Predicate((Comparison("l_extendedprice", ">", price),)),
            Join(
                JoinSpec(equi=(("l_orderkey", "o_orderkey"),)),
                Sample(BernoulliSpec(p, seed=bern_seed), Scan("l")),
                Sample(WorSpec(n, seed=wor_seed), Scan("o")),
            ),
        ),
    )


def four_relation_plan(p_l=0.3, n_o=25, p_p=0.5):
    """((l join o) join c) join p with samplers on l, o, and p only."""
    return SumAggregate(
        "l_discount*(1.0-l_tax)",
        Join(
            JoinSpec(equi=(("l_partkey", "p_partkey"),)),
            Join(
                JoinSpec(equi=(("o_custkey", "c_custkey"),)),
                Join(
                    JoinSpec(equi=(("l_orderkey", "o_orderkey"),)),
                    Sample(BernoulliSpec(p_l, seed=11), Scan("l")),
                    Sample(WorSpec(n_o, seed=12), Scan("o")),
                ),
                Scan("c"),
            ),
            Sample(BernoulliSpec(p_p, seed=13), Scan("p")),
        ),
    )


@pytest.fixture(scope="session")
def desk_paths(tmp_path_factory):
    out = tmp_path_factory.mktemp("deskdata")
    return generate_tpch_tiny(DESK_SCALE, DESK_SEED, out)


@pytest.fixture(scope="session")
def desk_catalog(desk_paths):
    return {
        "l": ingest_csv(desk_paths["lineitem"], "l", LINEITEM_TYPES,
                        "l_orderkey*10+l_linenumber"),
        "o": ingest_csv(desk_paths["orders"], "o", ORDERS_TYPES, "o_orderkey"),
        "c": ingest_csv(desk_paths["customer"], "c", CUSTOMER_TYPES, "c_custkey"),
        "p": ingest_csv(desk_paths["part"], "p", PART_TYPES, "p_partkey"),
    }
