"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 numerical or validation error.
Errors are also written to stderr as a one-line JSON object.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from contextlib import contextmanager

import numpy as np

from . import analytic, mclab
from .errors import MvtcError
from .graph import graph_from_model, load_graph, save_graph, sidepath_nodes
from .infer import InferenceConfig, infer_graph, write_links_csv
from .measures import bootstrap_ci, coupling_measure, cross_correlation_function, measure
from .model import TimeSeriesData, load_model, read_csv, simulate, write_csv

logger = logging.getLogger("mvtc")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@contextmanager
def _output(path, newline=None):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline=newline) as fh:
            yield fh


def _dump_json(doc, path):
    with _output(path) as fh:
        json.dump(doc, fh, indent=2, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _positive(kind):
    def check(text):
        value = kind(text)
        if value <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value
    return check


def _fraction(text):
    value = float(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text}")
    return value


def _non_negative(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return value


def _link_args(p):
    p.add_argument("--source", required=True, help="source variable name or index")
    p.add_argument("--target", required=True, help="target variable name or index")
    p.add_argument("--lag", type=_positive(int), default=1)


def _var(text):
    return int(text) if text.lstrip("-").isdigit() else text


def _load_data(args) -> TimeSeriesData:
    columns = args.columns.split(",") if getattr(args, "columns", None) else None
    data = read_csv(args.data, columns)
    if getattr(args, "deseasonalize", False):
        data = deseasonalize(data, args.period)
    return data


def deseasonalize(data: TimeSeriesData, period: int = 12) -> TimeSeriesData:
    """Remove the mean of each phase of the cycle (row ``i`` has phase ``i % period``)."""
    values = np.array(data.values)
    for phase in range(period):
        values[phase::period] -= values[phase::period].mean(axis=0)
    return TimeSeriesData(values, data.var_names)


# -- subcommands ---------------------------------------------------------------

def cmd_simulate(args):
    model = load_model(args.model)
    data = simulate(model, args.length, args.seed, args.burn_in)
    if args.out in (None, "-"):
        w = csv.writer(sys.stdout)
        w.writerow(data.var_names)
        w.writerows([[repr(float(v)) for v in row] for row in data.values])
    else:
        write_csv(data, args.out)


def cmd_cov(args):
    model = load_model(args.model)
    table = analytic.lagged_covariance(model, args.tau_max, args.tol)
    names = model.var_names
    with _output(args.out, newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lag", "row", "col", "gamma"])
        for lag in range(table.tau_max + 1):
            for i, a in enumerate(names):
                for j, b in enumerate(names):
                    w.writerow([lag, a, b, repr(float(table.gammas[lag, i, j]))])
    logger.info("truncation error estimate %.3g", table.truncation_error)


def cmd_theorem(args):
    model = load_model(args.model)
    graph = graph_from_model(model, args.eps)
    src = (model.index(_var(args.source)), args.lag)
    tgt = model.index(_var(args.target))
    tq = analytic.theorem_quantities(model, graph, src, tgt)
    side = sidepath_nodes(graph, model, src, tgt)
    name = model.var_names.__getitem__
    doc = {
        "source": name(src[0]),
        "target": name(tgt),
        "lag": args.lag,
        "c": tq.c,
        "sigma_x2": tq.sigma_x2,
        "sigma_y2": tq.sigma_y2,
        "w_nodes": [[name(v), lag] for v, lag in tq.w_nodes],
        "z_nodes": [[name(v), lag] for v, lag in tq.z_nodes],
        "sidepath_cov": tq.sidepath_cov,
        "schur": tq.schur,
        "cov_xy": tq.cov_xy,
        "var_y": tq.var_y,
        "var_x": tq.var_x,
        "mit": tq.mit,
        "no_sidepath_mit": tq.no_sidepath_mit,
        "sidepath_nodes": [[name(v), lag] for v, lag in sorted(side)],
        "analytic": {
            kind: analytic.analytic_measure(model, kind, src, tgt, graph)
            for kind in ("CC", "ITY", "ITX", "MIT", "MITS")
        },
    }
    _dump_json(doc, args.out)


def cmd_measure(args):
    data = _load_data(args)
    graph = load_graph(args.graph)
    model = load_model(args.model) if args.model else None
    src = (_var(args.source), args.lag)
    res = measure(data, graph, args.kind, src, _var(args.target), model, args.alpha)
    if args.boot and args.kind.upper() != "CMIT":
        ci = bootstrap_ci(data, graph, args.kind, src, _var(args.target), args.level, args.boot,
                          args.seed, model)
        res = res.with_ci(ci, args.level)
    doc = res.to_dict(data.var_names)
    doc["significant"] = res.significant(args.alpha)
    _dump_json(doc, args.out)


def _config(args):
    return InferenceConfig(args.tau_max, args.alpha, args.max_conds, args.max_iters)


def cmd_infer(args):
    data = _load_data(args)
    result = infer_graph(data, _config(args))
    if args.boot:
        result.links[:] = [
            r.with_ci(bootstrap_ci(data, result.graph, "MIT", (r.source.var, r.source.lag), r.target,
                                   args.level, args.boot, args.seed), args.level)
            for r in result.links
        ]
    if args.out in (None, "-"):
        _dump_json(result.graph.to_dict(), None)
    else:
        save_graph(result.graph, args.out)
    if args.links_out:
        write_links_csv(result, args.links_out)


ANALYZE_COLUMNS = [
    "source", "target", "lag", "cc", "cc_p", "cc_significant",
    "link", "mit", "mit_p", "mit_significant", "ci_low", "ci_high",
]


def lag_function_matrix(data: TimeSeriesData, config: InferenceConfig, level=0.9, n_boot=1000,
                        seed=0):
    """Rows of the lag-function table: CC at every lag, MIT from the inferred graph.

    Bootstrap intervals are attached to the inferred links; ``n_boot = 0``
    skips them.
    """
    result = infer_graph(data, config)
    graph = result.graph
    rows = []
    n = data.n_vars
    for s in range(n):
        for t in range(n):
            ccf = cross_correlation_function(data, s, t, config.tau_max)
            for lag in range(0 if s != t else 1, config.tau_max + 1):
                cc = ccf[lag]
                row = {
                    "source": data.var_names[s], "target": data.var_names[t], "lag": lag,
                    "cc": cc.estimate, "cc_p": cc.p_value,
                    "cc_significant": int(cc.significant(config.alpha)),
                    "link": int((s, t, lag) in graph.directed_links),
                    "mit": "", "mit_p": "", "mit_significant": "", "ci_low": "", "ci_high": "",
                }
                if lag >= 1:
                    mit = coupling_measure(data, graph, "MIT", (s, lag), t)
                    row.update(mit=mit.estimate, mit_p=mit.p_value,
                               mit_significant=int(mit.significant(config.alpha)))
                    if row["link"] and n_boot:
                        lo, hi = bootstrap_ci(data, graph, "MIT", (s, lag), t, level, n_boot, seed)
                        row.update(ci_low=lo, ci_high=hi)
                rows.append(row)
    return rows, result


def cmd_analyze(args):
    data = _load_data(args)
    rows, result = lag_function_matrix(data, _config(args), args.level, args.boot, args.seed)
    with _output(args.out, newline="") as fh:
        w = csv.DictWriter(fh, ANALYZE_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    if args.graph_out:
        save_graph(result.graph, args.graph_out)
    logger.info("inferred graph: %s", result.graph)


def cmd_mc(args):
    model = load_model(args.model)
    kinds = [k.strip().upper() for k in args.kind.split(",") if k.strip()]
    src = (_var(args.source), args.lag)
    ens = mclab.run_ensembles(model, kinds, src, _var(args.target), args.length, args.reps, args.seed)
    summaries = [mclab.summary(ens[k]) for k in kinds]
    _dump_json(summaries[0] if len(summaries) == 1 else summaries, args.out)
    if args.qq_out:
        mclab.write_qq_csv([mclab.qq_points(ens[k]) for k in kinds], args.qq_out)


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mvtc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a VAR model (JSON) into a CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--length", type=_positive(int), default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--burn-in", type=_non_negative, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("cov", help="analytic lagged covariances as CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--tau-max", type=_non_negative, default=10)
    p.add_argument("--tol", type=_positive(float), default=analytic.DEFAULT_TOL)
    p.add_argument("--out")
    p.set_defaults(func=cmd_cov)

    p = sub.add_parser("theorem", help="closed-form MIT and its components for one link")
    p.add_argument("--model", required=True)
    _link_args(p)
    p.add_argument("--eps", type=_positive(float), default=1e-12)
    p.add_argument("--out")
    p.set_defaults(func=cmd_theorem)

    def data_args(p):
        p.add_argument("--data", required=True)
        p.add_argument("--columns", help="comma-separated subset of CSV columns")
        p.add_argument("--deseasonalize", action="store_true",
                       help="remove per-phase means (monthly anomalies by default)")
        p.add_argument("--period", type=_positive(int), default=12)

    def test_args(p):
        p.add_argument("--alpha", type=_fraction, default=0.05)
        p.add_argument("--level", type=_fraction, default=0.90)
        p.add_argument("--seed", type=int, default=0)

    def infer_args(p):
        p.add_argument("--tau-max", type=_positive(int), default=10)
        p.add_argument("--max-conds", type=_non_negative, default=3)
        p.add_argument("--max-iters", type=_positive(int), default=10)

    p = sub.add_parser("measure", help="estimate one coupling measure")
    data_args(p)
    p.add_argument("--graph", required=True)
    p.add_argument("--model", help="model JSON used to find sidepaths for MITS")
    p.add_argument("--kind", default="MIT", choices=["CC", "MIT", "ITY", "ITX", "MITS", "CMIT"],
                   type=str.upper)
    _link_args(p)
    test_args(p)
    p.add_argument("--boot", type=_non_negative, default=0, help="bootstrap replicates (0 = none)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("infer", help="estimate the time series graph")
    data_args(p)
    infer_args(p)
    test_args(p)
    p.add_argument("--boot", type=_non_negative, default=0)
    p.add_argument("--out")
    p.add_argument("--links-out")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("analyze", help="lag-function matrix of CC and MIT")
    data_args(p)
    infer_args(p)
    test_args(p)
    p.add_argument("--boot", type=_non_negative, default=1000)
    p.add_argument("--out")
    p.add_argument("--graph-out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("mc", help="Monte Carlo sampling distribution of measures")
    p.add_argument("--model", required=True)
    p.add_argument("--kind", default="MIT", help="comma-separated measure kinds")
    _link_args(p)
    p.add_argument("--length", type=_positive(int), default=20)
    p.add_argument("--reps", type=_positive(int), default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--qq-out")
    p.set_defaults(func=cmd_mc)
    return parser


def _fail(code, exc):
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(doc), file=sys.stderr)
    return code


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        return _fail(EXIT_USAGE, exc)
    except KeyError as exc:
        return _fail(EXIT_USAGE, UsageError(f"unknown variable: {exc.args[0]}"))
    except (MvtcError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail(EXIT_NUMERIC, exc)
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
