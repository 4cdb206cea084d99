"""Command-line surface.

    gusbox estimate <plan.json> [--seed N] [--explain] [--oracle]
                    [--subsample l=0.2,o=0.3] [--format json|text] [--out FILE]
    gusbox generate --scale l=1000,o=250,c=50,p=100 --seed 7 --out DIR

Exit codes: 0 success, 2 plan/ingestion errors, 3 estimate not identifiable.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import datagen, estimator, oracle, samplers
from .algebra import normalize_plan
from .dsl import parse_plan
from .engine import execute, execute_full
from .errors import (
    DegenerateSamplingError,
    EnumerationInfeasibleError,
    ExpressionError,
    GusboxError,
    IngestError,
    NotIdentifiableError,
    PlanError,
    SchemaError,
)
from .ingest import ingest_csv
from .plan import SumAggregate

_SUBSAMPLE_SEED_SPACE = 0x5B5A11CE


def _parse_subsample(text: str, master_seed: int) -> dict[str, tuple[float, int]]:
    dims = {}
    for i, part in enumerate(sorted(p.strip() for p in text.split(",") if p.strip())):
        if "=" not in part:
            raise PlanError(f"bad subsample entry {part!r}; expected relation=p")
        name, _, value = part.partition("=")
        try:
            p = float(value)
        except ValueError:
            raise PlanError(f"bad subsample probability {value!r}") from None
        if not 0.0 <= p <= 1.0:
            raise PlanError(f"subsample probability {p} outside [0, 1]")
        dims[name.strip()] = (p, samplers.derive_seed(master_seed, _SUBSAMPLE_SEED_SPACE + i))
    if not dims:
        raise PlanError("empty subsample spec")
    return dims


def _fmt(x: float) -> str:
    return f"{x:.4g}"


def _text_report(report: estimator.EstimateReport, trace, oracle_doc) -> str:
    schema = report.gus.schema
    lines = [
        f"estimate        {_fmt(report.estimate)}",
        f"a               {_fmt(report.a)}",
        f"variance        {_fmt(report.variance_hat)}",
        f"sigma           {_fmt(report.sigma_hat)}",
        f"ci normal 95%   [{_fmt(report.ci_normal[0])}, {_fmt(report.ci_normal[1])}]",
        f"ci chebyshev    [{_fmt(report.ci_chebyshev[0])}, {_fmt(report.ci_chebyshev[1])}]",
        f"sample rows     {report.sample_rows}",
    ]
    for q, v in report.quantile_requests:
        lines.append(f"quantile {q:<6g} {_fmt(v)}")
    lines.append("subset          b(gus)       c            ySample      yHat")
    for s in range(schema.num_subsets):
        key = schema.subset_key(s) or "(empty)"
        lines.append(
            f"{key:<15} {_fmt(report.gus.b[s]):<12} {_fmt(report.c_table[s]):<12} "
            f"{_fmt(report.y_sample[s]):<12} {_fmt(report.y_hat[s])}"
        )
    if report.subsample_rows is not None:
        lines.append(f"subsample rows  {report.subsample_rows}")
    for note in report.diagnostics:
        lines.append(f"note: {note}")
    if trace is not None:
        lines.append("rewrite trace:")
        for step in trace:
            lines.append(f"  {step.rule}: {step.note} -> a={_fmt(step.output.a)}")
    if oracle_doc is not None:
        lines.append(f"oracle truth    {_fmt(oracle_doc['trueSum'])}")
        exact = oracle_doc.get("exact")
        if exact:
            lines.append(
                f"oracle exact    mean={_fmt(exact['mean'])} variance={_fmt(exact['variance'])}")
        lines.append(f"oracle exact-y  variance={_fmt(oracle_doc['exactYVariance'])}")
        mc = oracle_doc["monteCarlo"]
        lines.append(
            f"oracle mc       mean={_fmt(mc['mean'])} variance={_fmt(mc['variance'])} "
            f"stderr={_fmt(mc['stderr'])} trials={mc['trials']}"
        )
    return "\n".join(lines)


def run_estimate(args) -> int:
    plan_path = Path(args.plan)
    try:
        text = plan_path.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read {plan_path}: {exc}", file=sys.stderr)
        return 2
    doc = parse_plan(text)
    catalog = {}
    for name, spec in doc.tables.items():
        path = Path(spec.path)
        if not path.is_absolute():
            path = plan_path.parent / path
        catalog[name] = ingest_csv(path, name, spec.column_types, spec.id_column)

    if not isinstance(doc.plan, SumAggregate):
        raise PlanError("plan: estimation needs a sum aggregate at the root")

    normalized = normalize_plan(doc.plan, catalog)
    executed = execute(doc.plan, catalog, master_seed=args.seed)

    if args.subsample:
        dims = _parse_subsample(args.subsample, args.seed)
        report = estimator.subsample_variance(
            executed.relation, normalized.gus, dims, quantiles=doc.quantiles)
    else:
        report = estimator.analyze(
            executed.relation, normalized.gus, quantiles=doc.quantiles)

    oracle_doc = None
    if args.oracle:
        oracle_doc = {"exact": None, "exactYVariance": None, "monteCarlo": None}
        try:
            mean, variance = oracle.enumerate_exact_moments(doc.plan, catalog)
            oracle_doc["exact"] = {"mean": mean, "variance": variance}
        except EnumerationInfeasibleError as exc:
            report.diagnostics.append(f"exact oracle skipped: {exc}")
        # the variance formula fed with full-data terms instead of sampled
        # estimates; must agree with the enumerated variance
        full = execute_full(doc.plan, catalog)
        oracle_doc["trueSum"] = full.aggregate
        oracle_doc["exactYVariance"] = estimator.variance_estimate(
            oracle.exact_y_terms(full.relation),
            report.c_table, normalized.gus.a)
        mean, variance, stderr = oracle.monte_carlo_moments(
            doc.plan, catalog, trials=args.oracle_trials, seed=args.seed)
        oracle_doc["monteCarlo"] = {
            "mean": mean, "variance": variance, "stderr": stderr,
            "trials": args.oracle_trials,
        }

    if args.format == "json":
        body = report.to_json_dict()
        if args.explain:
            body["trace"] = [step.to_json_dict() for step in normalized.trace]
        if oracle_doc is not None:
            body["oracle"] = oracle_doc
        output = json.dumps(body, indent=2)
    else:
        output = _text_report(
            report, normalized.trace if args.explain else None, oracle_doc)

    if args.out:
        Path(args.out).write_text(output + "\n", encoding="utf-8")
    else:
        print(output)
    return 0


def run_generate(args) -> int:
    scale = datagen.parse_scale(args.scale) if args.scale else {}
    paths = datagen.generate_tpch_tiny(scale, args.seed, args.out)
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gusbox",
        description="Estimate sum aggregates, with variance and confidence "
                    "intervals, for query plans that sample their inputs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="run a plan document and report the estimate")
    est.add_argument("plan", help="path to the JSON plan document")
    est.add_argument("--seed", type=int, default=0, help="run seed (default 0)")
    est.add_argument("--explain", action="store_true",
                     help="include the plan rewrite trace")
    est.add_argument("--oracle", action="store_true",
                     help="attach exact and Monte Carlo ground truth when feasible")
    est.add_argument("--oracle-trials", type=int, default=2000,
                     help="Monte Carlo trials for --oracle (default 2000)")
    est.add_argument("--subsample", metavar="SPEC",
                     help="estimate variance terms from a keyed sub-sample, "
                          "e.g. l=0.2,o=0.3")
    est.add_argument("--format", choices=("json", "text"), default="json")
    est.add_argument("--out", help="write the report here instead of stdout")
    est.set_defaults(func=run_estimate)

    gen = sub.add_parser("generate", help="write deterministic desk-scale CSVs")
    gen.add_argument("--scale", default="", help="row counts, e.g. l=1000,o=250,c=50,p=100")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output directory")
    gen.set_defaults(func=run_generate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (NotIdentifiableError, DegenerateSamplingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (PlanError, IngestError, ExpressionError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GusboxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
