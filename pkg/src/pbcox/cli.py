"""Command-line interface.

Subcommands: ``fit`` (CSV in, coefficient/baseline report out), ``pb``
(pmf values straight from the kernel), ``simulate`` (Monte Carlo cell
from a JSON config) and ``sweep`` (grouping-width sweep on a dataset).
Exit codes partition outcomes: 0 success, 2 input error, 3 numeric or
fit error; failures emit a machine-readable JSON error record on stderr.
"""

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import analysis, pb_kernel
from .estimation import (
    baseline_nelson_aalen,
    fit_breslow,
    fit_efron,
    fit_pb,
    wald_ci,
)
from .exceptions import (
    CapacityError,
    DegenerateCovariateError,
    DomainError,
    EvaluationError,
    FitError,
    ParseError,
    PBCoxError,
    StructureError,
)
from .simulation import METHODS, SimulationConfig, run_simulation, summary_rows
from .survival import (
    build_risk_structure,
    group_times,
    load_csv,
    load_csv_dropping_missing,
    standardize_covariates,
)

_INPUT_ERRORS = (
    ParseError,
    DomainError,
    StructureError,
    DegenerateCovariateError,
    CapacityError,
    OSError,
    json.JSONDecodeError,
    TypeError,
    ValueError,
)
_NUMERIC_ERRORS = (FitError, EvaluationError, np.linalg.LinAlgError)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

THREADS_ENV_VAR = "PBCOX_THREADS"


def _nine(x):
    """Round floats to 9 significant digits, recursively."""
    if isinstance(x, float):
        return float(f"{x:.9g}") if math.isfinite(x) else x
    if isinstance(x, dict):
        return {k: _nine(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_nine(v) for v in x]
    if isinstance(x, np.ndarray):
        return _nine(x.tolist())
    if isinstance(x, (np.floating,)):
        return _nine(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def _emit_error(exc):
    record = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    print(json.dumps(record), file=sys.stderr)


def _default_threads():
    raw = os.environ.get(THREADS_ENV_VAR, "").strip()
    if raw.isdigit() and int(raw) >= 1:
        return int(raw)
    return 1


def _parse_cols(raw):
    cols = [c.strip() for c in raw.split(",") if c.strip()]
    if not cols:
        raise DomainError("need at least one covariate column")
    return cols


def _load_dataset(args):
    cols = _parse_cols(args.covariate_cols)
    if getattr(args, "drop_missing", False):
        data, n_dropped = load_csv_dropping_missing(
            args.input, args.time_col, args.status_col, cols
        )
        if n_dropped:
            print(json.dumps({"dropped_rows_with_missing_values": n_dropped}),
                  file=sys.stderr)
        return data
    return load_csv(args.input, args.time_col, args.status_col, cols)


# ---------------------------------------------------------------- fit

def _fit_report(data, args):
    if args.tau > 0.0:
        data = data.with_times(group_times(data.times, args.tau))
    risk = build_risk_structure(data)
    wanted = METHODS if args.method == "all" else (args.method,)

    fits = {}
    breslow = efron = None
    need_pb = "pb" in wanted
    if "breslow" in wanted or (
        need_pb and (args.init_beta == "breslow" or args.init_lambda == "breslow")
    ):
        breslow = fit_breslow(data, risk)
    if "efron" in wanted or (
        need_pb and (args.init_beta == "efron" or args.init_lambda == "efron")
    ):
        efron = fit_efron(data, risk)
    if "breslow" in wanted:
        fits["breslow"] = breslow
    if "efron" in wanted:
        fits["efron"] = efron
    if "pb" in wanted:
        init_beta = {
            "efron": lambda: efron.beta_hat,
            "breslow": lambda: breslow.beta_hat,
            "zero": lambda: np.zeros(data.n_covariates),
        }[args.init_beta]()
        init_lambda = {
            "efron": lambda: efron.baseline,
            "breslow": lambda: breslow.baseline,
            "nelson-aalen": lambda: baseline_nelson_aalen(risk),
        }[args.init_lambda]()
        fits["pb"] = fit_pb(data, risk, init_beta, init_lambda)

    covariate_names = _parse_cols(args.covariate_cols)
    report = {
        "input": str(args.input),
        "n": data.n,
        "tau": args.tau,
        "ci_level": args.ci_level,
        "covariates": covariate_names,
        "methods": {},
    }
    for name, fit in fits.items():
        ci = wald_ci(fit, args.ci_level)
        report["methods"][name] = {
            "beta": fit.beta_hat,
            "std_err": fit.std_err,
            "ci_lower": ci.lower,
            "ci_upper": ci.upper,
            "loglik": fit.loglik_at_optimum,
            "converged": fit.converged,
            "iterations": fit.iterations,
            "grad_norm": fit.grad_norm,
            "baseline": {
                "event_times": risk.event_times,
                "lambdas": fit.baseline,
            },
        }
    return report, covariate_names


def _write_fit_csv(report, names, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "term", "estimate", "std_err", "ci_lower",
                    "ci_upper", "loglik", "converged"])
        for method, rec in report["methods"].items():
            for i, term in enumerate(names):
                w.writerow(_nine([
                    method, term, rec["beta"][i], rec["std_err"][i],
                    rec["ci_lower"][i], rec["ci_upper"][i],
                    rec["loglik"], rec["converged"],
                ]))
    base = os.path.splitext(path)[0] + "_baseline.csv"
    with open(base, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "event_time", "lambda"])
        for method, rec in report["methods"].items():
            for t, lam in zip(rec["baseline"]["event_times"],
                              rec["baseline"]["lambdas"]):
                w.writerow(_nine([method, t, lam]))


def cmd_fit(args):
    data = _load_dataset(args)
    report, names = _fit_report(data, args)
    if args.format == "json":
        text = json.dumps(_nine(report), indent=2)
        if args.output:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        else:
            print(text)
    else:
        if not args.output:
            raise DomainError("--format csv requires --output")
        _write_fit_csv(report, names, args.output)
    return EXIT_OK


# ----------------------------------------------------------------- pb

_PB_ALGOS = {
    "enum": pb_kernel.pb_pmf_enum,
    "dft": pb_kernel.pb_pmf_dft,
    "conv": pb_kernel.pb_pmf_conv,
    "poisson": pb_kernel.pb_pmf_poisson,
}


def cmd_pb(args):
    if args.probs_file:
        with open(args.probs_file, encoding="utf-8") as fh:
            raw = fh.read().replace("\n", ",")
    else:
        raw = args.probs
    if not raw:
        raise DomainError("supply --probs or --probs-file")
    probs = [float(tok) for tok in raw.split(",") if tok.strip()]
    algos = list(_PB_ALGOS) if args.algo == "all" else [args.algo]
    for name in algos:
        res = _PB_ALGOS[name](probs, args.d)
        print(f"{res.algorithm} {_nine(res.value):.9g}")
    print(f"lecam_bound {_nine(pb_kernel.lecam_bound(probs)):.9g}")
    return EXIT_OK


# ----------------------------------------------------------- simulate

def cmd_simulate(args):
    with open(args.config, encoding="utf-8") as fh:
        raw = json.load(fh)
    if args.seed is not None:
        raw["seed"] = args.seed
    config = SimulationConfig.from_dict(raw)
    methods = tuple(_parse_cols(args.methods)) if args.methods else METHODS
    threads = args.threads or _default_threads()
    print(json.dumps({"config": _nine(config.to_dict()), "methods": list(methods),
                      "threads": threads}))
    summary = run_simulation(config, methods=methods, threads=threads)
    rows = summary_rows(summary)
    prefix = args.output_prefix
    with open(prefix + ".json", "w", encoding="utf-8") as fh:
        json.dump(_nine({"config": config.to_dict(), "valid": summary.valid,
                         "methods": rows}), fh, indent=2)
        fh.write("\n")
    with open(prefix + ".csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        header = list(rows[0].keys())
        w.writerow(header)
        for row in rows:
            w.writerow(_nine([row[h] for h in header]))
    if not summary.valid:
        _emit_error(FitError("summary flagged invalid: excess replicate failures"))
        return EXIT_NUMERIC
    return EXIT_OK


# -------------------------------------------------------------- sweep

def _sweep_cell(payload):
    data, tau = payload
    return analysis.tau_sweep(data, [tau])[0]


def cmd_sweep(args):
    data = _load_dataset(args)
    data = analysis.scale_times(data)
    data, _ = standardize_covariates(data)
    if args.taus == "default":
        taus = list(analysis.DEFAULT_TAUS)
    else:
        taus = [float(tok) for tok in args.taus.split(",") if tok.strip()]
    threads = args.threads or _default_threads()
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(_sweep_cell, [(data, t) for t in taus]))
    else:
        records = analysis.tau_sweep(data, taus)
    os.makedirs(args.output_dir, exist_ok=True)
    long_path = os.path.join(args.output_dir, "sweep.csv")
    wide_path = os.path.join(args.output_dir, "sweep_wide.csv")
    analysis.write_sweep_csv(records, long_path)
    analysis.write_sweep_wide_csv(records, wide_path)
    n_failed = sum(1 for r in records if r.error)
    print(json.dumps({"taus": _nine(taus), "rows": len(records),
                      "failed": n_failed, "output": [long_path, wide_path]}))
    if n_failed > 0.05 * len(records):
        _emit_error(FitError(f"{n_failed} of {len(records)} sweep cells failed"))
        return EXIT_NUMERIC
    return EXIT_OK


# ------------------------------------------------------------- parser

def build_parser():
    parser = argparse.ArgumentParser(
        prog="pbcox",
        description="Cox model fitting with an exact Poisson-binomial tie likelihood",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_fit = sub.add_parser("fit", help="fit estimators to a CSV dataset")
    p_fit.add_argument("--input", required=True)
    p_fit.add_argument("--time-col", default="time")
    p_fit.add_argument("--status-col", default="status")
    p_fit.add_argument("--covariate-cols", required=True,
                       help="comma-separated covariate column names")
    p_fit.add_argument("--method", choices=("all",) + METHODS, default="all")
    p_fit.add_argument("--tau", type=float, default=0.0,
                       help="optional grouping width applied before fitting")
    p_fit.add_argument("--ci-level", type=float, default=0.95)
    p_fit.add_argument("--init-beta", choices=("efron", "breslow", "zero"),
                       default="efron")
    p_fit.add_argument("--init-lambda",
                       choices=("efron", "breslow", "nelson-aalen"), default="efron")
    p_fit.add_argument("--output")
    p_fit.add_argument("--format", choices=("json", "csv"), default="json")
    p_fit.add_argument("--drop-missing", action="store_true",
                       help="drop rows with empty cells instead of erroring")
    p_fit.set_defaults(func=cmd_fit)

    p_pb = sub.add_parser("pb", help="evaluate the Poisson-binomial pmf")
    p_pb.add_argument("--probs", help="comma-separated probabilities")
    p_pb.add_argument("--probs-file")
    p_pb.add_argument("--d", type=int, required=True)
    p_pb.add_argument("--algo", choices=("enum", "dft", "conv", "poisson", "all"),
                      default="all")
    p_pb.set_defaults(func=cmd_pb)

    p_sim = sub.add_parser("simulate", help="run a Monte Carlo cell")
    p_sim.add_argument("--config", required=True, help="JSON config file")
    p_sim.add_argument("--seed", type=int, help="override the config seed")
    p_sim.add_argument("--methods", help="comma-separated subset of methods")
    p_sim.add_argument("--threads", type=int,
                       help=f"worker processes (default ${THREADS_ENV_VAR} or 1)")
    p_sim.add_argument("--output-prefix", default="simulation")
    p_sim.set_defaults(func=cmd_simulate)

    p_sw = sub.add_parser("sweep", help="grouping-width sweep on a dataset")
    p_sw.add_argument("--input", required=True)
    p_sw.add_argument("--time-col", default="time")
    p_sw.add_argument("--status-col", default="status")
    p_sw.add_argument("--covariate-cols", required=True)
    p_sw.add_argument("--taus", default="default",
                      help="comma-separated grid, or 'default' for 0,0.01..0.25")
    p_sw.add_argument("--output-dir", default=".")
    p_sw.add_argument("--threads", type=int)
    p_sw.add_argument("--drop-missing", action="store_true",
                      help="drop rows with empty cells instead of erroring")
    p_sw.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _NUMERIC_ERRORS as exc:
        _emit_error(exc)
        return EXIT_NUMERIC
    except _INPUT_ERRORS as exc:
        _emit_error(exc)
        return EXIT_INPUT
    except PBCoxError as exc:
        _emit_error(exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
