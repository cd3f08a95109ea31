"""Command-line interface: ``intervalmt {analyze,audit,simulate,reproduce}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 audit found violations.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from pathlib import Path

import numpy as np

from . import audit as audit_mod
from . import simulation
from .errors import DataError
from .families import HypothesisFamily, canonical_shape
from .io import RunSpec, dumps, ingest_table, make_report, read_criticals, write_text
from .partition import rsd_run, split_statistic
from .statistics import CriticalValues, critical_values_bg, critical_values_bh
from .stepwise import STAT_KINDS, pairwise_stats, step_down, step_up

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VIOLATION = 0, 1, 2, 3
SEED_ENV = "INTERVALMT_SEED"

MODELS = ("multinomial", "normal", "rank")
FAMILIES = ("all-pairwise", "change-point", "tvc")
PROCEDURES = ("rsd", "step-down", "step-up")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def resolve_criticals(text: str, K: int, alpha: float) -> CriticalValues:
    """``bh``/``bg`` (generated for ``K`` at ``alpha``), a file path, or an inline list."""
    key = text.strip().lower()
    if key == "bh":
        return critical_values_bh(K, alpha)
    if key == "bg":
        return critical_values_bg(K, alpha)
    if Path(text).is_file():
        return read_criticals(text)
    try:
        return CriticalValues.parse(text)
    except ValueError as exc:
        raise UsageError(f"cannot use critical values {text!r}: {exc}") from None


def parse_rows(text: str | None) -> list[int] | None:
    if not text:
        return None
    rows = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            rows.extend(range(int(lo), int(hi) + 1))
        elif part:
            rows.append(int(part))
    return rows


def parse_pair(text: str) -> tuple[int, int]:
    try:
        i, j = (int(t) for t in text.replace(" ", "").split(","))
    except ValueError:
        raise UsageError(f"--pair expects 'i,j', got {text!r}") from None
    return i, j


def parse_block(text: str) -> tuple[tuple[int, int], float]:
    """``"6-10:2.0"`` -> ``((6, 10), 2.0)``."""
    try:
        span, mean = text.split(":")
        lo, _, hi = span.partition("-")
        return (int(lo), int(hi or lo)), float(mean)
    except ValueError:
        raise UsageError(f"--block expects 'first-last:mean', got {text!r}") from None


def _emit(report: dict, output: str | None) -> None:
    if output:
        write_text(output, dumps(report))


def _build_family(args, k: int) -> HypothesisFamily:
    try:
        return HypothesisFamily(canonical_shape(args.family), k, args.sided, args.control)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _procedure_runner(procedure: str, family: HypothesisFamily, criticals: CriticalValues,
                      stat_kind: str | None, sigma: float, pooling: str, w: float | None):
    """Callable ``data -> (DecisionReport, trace or None)``."""
    if procedure == "rsd":
        def run(data):
            h_fn = split_statistic(data, family.sided, pooling=pooling, w=w)
            trace, report = rsd_run(data, family, h_fn, criticals)
            return report, trace
    else:
        rule = step_down if procedure == "step-down" else step_up

        def run(data):
            stats = pairwise_stats(data, family, stat_kind, sigma=sigma, w=w)
            return rule(stats, criticals), None
    return run


def _criticals_for(args, family: HypothesisFamily) -> CriticalValues:
    K = family.max_splits if args.procedure == "rsd" else len(family.pairs)
    return resolve_criticals(args.criticals, K, args.alpha)


def _extrapolation_notes(args) -> list[str]:
    notes = []
    if (args.procedure == "step-up" and args.model == "multinomial"
            and canonical_shape(args.family) == "change-point" and args.sided == "one"):
        notes.append("extrapolation: step-up for one-sided multinomial change-point "
                     "is outside the validated combinations")
    return notes


# ------------------------------------------------------------------ #
# Subcommands
# ------------------------------------------------------------------ #


def cmd_analyze(args) -> int:
    data = ingest_table(args.input, args.format, args.model, args.n)
    family = _build_family(args, data.k)
    criticals = _criticals_for(args, family)
    run = _procedure_runner(args.procedure, family, criticals, args.stat, args.sigma,
                            args.pooling, args.w)
    report, trace = run(data)
    spec = RunSpec("analyze", args.model, family.shape, args.procedure, args.sided,
                   criticals.source, list(criticals.values), args.alpha, str(args.input),
                   args.output, None,
                   extra={"stat": args.stat, "pooling": args.pooling, "w": args.w,
                          "sigma": args.sigma, "n": args.n, "control": family.control},
                   notes=_extrapolation_notes(args))

    print(f"{args.procedure} on {family.shape} ({family.sided}-sided), k={family.k}")
    print("critical values: " + ", ".join(f"{c:.4f}" for c in criticals.values))
    for note in spec.notes:
        print(note)
    if trace is not None:
        for step in trace.steps:
            verdict = "split" if step.executed else "stop"
            print(f"stage {step.stage}: block {{{','.join(map(str, step.block))}}} "
                  f"best {{{','.join(map(str, step.split))}}} H={step.value:.4f} "
                  f"vs C={step.threshold:.4f} -> {verdict}")
        print(f"final partition: {trace.final}")
    print(report.format(data.row_labels))

    body = {"decisions": report.to_dict()}
    if trace is not None:
        body["trace"] = trace.to_dict()
    _emit(make_report(spec, **body), args.output)
    return EXIT_OK


def cmd_audit(args) -> int:
    seed = args.seed if args.seed is not None else default_seed()
    if args.builtin:
        if args.procedure not in ("step-down", "rsd"):
            raise UsageError("built-in counterexamples support step-down and rsd")
        cx = audit_mod.BUILTINS[args.builtin]()
        result = audit_mod.audit_counterexample(cx, args.procedure)
        spec = RunSpec("audit", "normal", cx.family.shape, args.procedure, cx.family.sided,
                       cx.criticals.source, list(cx.criticals.values), None, None, args.output,
                       None, extra={"builtin": args.builtin})
        results = [result]
        print(f"{args.builtin}: {args.procedure} pattern "
              f"{['reject' if r else 'accept' for r in result.pattern]}")
    elif args.certify:
        if args.procedure != "rsd":
            raise UsageError("--certify scans the rsd procedure only")
        cases = audit_mod.CERTIFIED_CASES
        if args.model:
            cases = [c for c in cases if c[0] == args.model]
        if args.family:
            cases = [c for c in cases if c[1] == canonical_shape(args.family)]
        if not cases:
            raise UsageError("no certified case matches the given model/family")
        results, summaries = [], []
        for model, shape, sided in cases:
            rep = audit_mod.certify(model, shape, sided, args.instances, seed, args.workers)
            results.extend(rep.violations)
            summaries.append({k: v for k, v in rep.to_dict().items() if k != "violations"})
            print(f"{model:12s} {shape:22s} {sided}-sided: {rep.instances} instances, "
                  f"{rep.informative} informative, {len(rep.violations)} violations")
        spec = RunSpec("audit", args.model, args.family, "rsd", None, "random", None, None,
                       None, args.output, seed, extra={"instances": args.instances,
                                                       "cases": summaries})
    else:
        if not args.input or not args.pair:
            raise UsageError("audit needs --builtin, --certify, or INPUT with --pair")
        data = ingest_table(args.input, args.format, args.model, args.n)
        family = _build_family(args, data.k)
        criticals = _criticals_for(args, family)
        run = _procedure_runner(args.procedure, family, criticals, args.stat, args.sigma,
                                args.pooling, args.w)
        pair = parse_pair(args.pair)
        if pair not in family.pairs:
            raise UsageError(f"pair {pair} is not tested by the {family.shape} family")
        g = audit_mod.direction_vector(data, pair)
        grid = audit_mod.valid_grid(data, g, np.linspace(0.0, args.a_max, args.points))
        pattern = audit_mod.ray_decisions(lambda d: run(d)[0], data, g, grid)
        v = audit_mod.check_pattern(pattern, family.sided)
        results = [audit_mod.AuditResult(args.procedure, family, data, g, grid, pattern, v)]
        spec = RunSpec("audit", args.model, family.shape, args.procedure, args.sided,
                       criticals.source, list(criticals.values), args.alpha, str(args.input),
                       args.output, None, extra={"pair": list(pair)})
        print(f"pair {pair}: {sum(pattern)}/{len(pattern)} grid points rejected")

    violations = [r for r in results if r.violation is not None]
    report = make_report(spec, violations=[r.to_dict() for r in violations],
                         scans=[r.to_dict() for r in results[:50]])
    if violations:
        print(dumps({"violations": report["violations"]}))
    else:
        print("no interval-property violations")
    _emit(report, args.output)
    return EXIT_VIOLATION if violations else EXIT_OK


def _sim_rows_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def cmd_simulate(args) -> int:
    seed = args.seed if args.seed is not None else default_seed()
    if args.config:
        import json
        try:
            cfg_dict = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read config {args.config}: {exc}") from None
        cfg_dict.setdefault("seed", seed)
        cfg = simulation.SimConfig.from_dict(cfg_dict)
    else:
        cfg = simulation.SimConfig(
            k=args.k, blocks=tuple(parse_block(b) for b in args.block),
            control_mean=args.control_mean, iterations=args.iterations,
            rsd_alpha=args.rsd_alpha, su_alpha=args.su_alpha, seed=seed, noise_sd=args.noise_sd)
    result = simulation.simulate(cfg)
    print(f"{'':6s}{'type I':>14s}{'type II':>14s}{'total':>14s}{'FDR':>16s}")
    for name in ("rsd", "su"):
        m = result.procedure(name)
        print(f"{name.upper():6s}" + "".join(
            f"{m.value(k):8.3f}±{m.se(k):5.3f}" for k in ("type1", "type2", "total"))
            + f"{m.fdr:9.4f}±{m.fdr_se:6.4f}")
    spec = RunSpec("simulate", "normal", "treatments-vs-control", "rsd,step-up", "two", "bg,bh",
                   None, None, None, args.output, cfg.seed, extra={"config": cfg.to_dict()})
    if args.output and args.output.lower().endswith(".csv"):
        row = {"seed": cfg.seed}
        for name in ("rsd", "su"):
            m = result.procedure(name)
            for k in simulation.METRICS:
                row[f"{name}_{k}"] = m.value(k)
                row[f"{name}_{k}_mcse"] = m.se(k)
        write_text(args.output, _sim_rows_csv([row]))
    else:
        _emit(make_report(spec, result=result.to_dict()), args.output)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    seed = args.seed if args.seed is not None else default_seed()
    try:
        rows = parse_rows(args.rows)
    except ValueError:
        raise UsageError(f"--rows expects e.g. '1,4,17' or '1-17', got {args.rows!r}") from None
    comparisons = simulation.table_runner(args.table, rows, args.iterations, seed)
    print(f"Table {args.table}: {args.iterations} iterations per row, seed {seed}")
    print(simulation.format_comparison(comparisons))
    worse = [c.row for c in comparisons if not c.rsd_not_worse()]
    print("RSD total <= SU total at every row" if not worse
          else f"RSD total exceeds SU total at rows {worse}")
    spec = RunSpec("reproduce", "normal", "treatments-vs-control", "rsd,step-up", "two",
                   "bg,bh", None, None, None, args.output, seed,
                   extra={"table": args.table, "rows": [c.row for c in comparisons],
                          "iterations": args.iterations})
    if args.output and args.output.lower().endswith(".csv"):
        write_text(args.output, _sim_rows_csv([c.csv_row() for c in comparisons]))
    else:
        body = []
        for c in comparisons:
            entry = c.csv_row()
            entry["within_tolerance"] = {f"{p}_{m}": c.within(p, m)
                                         for p in ("rsd", "su") for m in simulation.METRICS}
            entry["rsd_not_worse"] = c.rsd_not_worse()
            body.append(entry)
        _emit(make_report(spec, rows=body), args.output)
    return EXIT_OK


# ------------------------------------------------------------------ #
# Parser
# ------------------------------------------------------------------ #


def _add_data_options(p: argparse.ArgumentParser, need_input: bool) -> None:
    p.add_argument("input", nargs=None if need_input else "?", help="CSV or JSON data table")
    p.add_argument("--format", choices=("csv", "json"), help="input format (default: from suffix)")
    p.add_argument("--model", choices=MODELS, default=None if not need_input else "multinomial")
    p.add_argument("--family", choices=FAMILIES, default="all-pairwise")
    p.add_argument("--sided", choices=("one", "two"), default="two")
    p.add_argument("--control", type=int, help="control population for tvc (default: last)")
    p.add_argument("--criticals", default="bg",
                   help="bh, bg, a file, or an inline list like 1.645,1.96 (default: bg)")
    p.add_argument("--alpha", type=float, default=0.05, help="level for generated critical values")
    p.add_argument("--n", type=int, help="per-population sample size (rank model)")
    p.add_argument("--stat", choices=STAT_KINDS, help="pairwise statistic for step-down/step-up")
    p.add_argument("--sigma", type=float, default=1.0, help="known sd for z-difference")
    p.add_argument("--pooling", choices=("mean", "sum"), default="mean",
                   help="how contingency rows are pooled in RSD splits")
    p.add_argument("--w", type=float, help="rank-statistic variance constant")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="intervalmt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="run a procedure on a data table")
    _add_data_options(p, need_input=True)
    p.add_argument("--procedure", choices=PROCEDURES, default="rsd")
    p.add_argument("--output", help="write the JSON report here")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("audit", help="scan rays for interval-property violations")
    _add_data_options(p, need_input=False)
    p.add_argument("--procedure", choices=PROCEDURES, default="rsd")
    p.add_argument("--builtin", choices=sorted(audit_mod.BUILTINS))
    p.add_argument("--certify", action="store_true", help="randomized RSD certification")
    p.add_argument("--instances", type=int, default=1000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--pair", help="tested pair 'i,j' for a data ray scan")
    p.add_argument("--a-max", type=float, default=5.0)
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--seed", type=int)
    p.add_argument("--output", help="write the JSON report here")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("simulate", help="RSD vs step-up Monte Carlo for treatments vs control")
    p.add_argument("--config", help="JSON file with SimConfig fields")
    p.add_argument("--k", type=int, default=101, help="populations including the control")
    p.add_argument("--block", action="append", default=[],
                   help="treatment block 'first-last:mean' (repeatable)")
    p.add_argument("--control-mean", type=float, default=0.0)
    p.add_argument("--iterations", type=int, default=5000)
    p.add_argument("--rsd-alpha", type=float, default=0.05)
    p.add_argument("--su-alpha", type=float, default=0.07)
    p.add_argument("--noise-sd", type=float, default=1.0)
    p.add_argument("--seed", type=int)
    p.add_argument("--output", help="JSON report, or CSV if the name ends in .csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reproduce", help="re-simulate rows of the reference tables")
    p.add_argument("--table", type=int, choices=sorted(simulation.TABLES), required=True)
    p.add_argument("--rows", help="e.g. '1,4,17' or '1-17' (default: all)")
    p.add_argument("--iterations", type=int, default=5000)
    p.add_argument("--seed", type=int)
    p.add_argument("--output", help="JSON report, or CSV if the name ends in .csv")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"intervalmt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"intervalmt: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"intervalmt: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"intervalmt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
