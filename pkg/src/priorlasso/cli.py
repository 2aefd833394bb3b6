"""Command-line interface: ``priorlasso fit|tune|bootstrap|lsa-fit|simulate``."""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__
from .constraints import infer_dimension, parse_constraints
from .data import read_csv
from .errors import DataError, PriorLassoError
from .estimator import FitSpec, fit_constrained, fit_penalized
from .inference import bootstrap_se, degrees_of_freedom, fit_family
from .report import bootstrap_record, dumps, file_digest, fit_record, tuning_record

EXIT_USAGE = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _float_list(text):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _mc_init(text):
    parts = text.split(",")
    try:
        m, seed = int(parts[0]), int(parts[1])
        if len(parts) != 2 or m < 1:
            raise ValueError
    except (ValueError, IndexError):
        raise argparse.ArgumentTypeError(f"expected m,seed with m >= 1, got {text!r}") from None
    return m, seed


def _budget(text):
    v = float(text)
    if math.isnan(v) or v < 0:
        raise argparse.ArgumentTypeError(f"budget must be nonnegative, got {text!r}")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _common(p, data=True, seed_required=False):
    if data:
        p.add_argument("--data", required=True, help="CSV file with a header row")
        p.add_argument("--response", default="y", help="response column (default: y)")
        p.add_argument("--constraints", help="constraint file")
        p.add_argument("--tol", type=float, default=1e-6,
                       help="estimates with |beta_j| <= tol are set to zero (default: 1e-6)")
        p.add_argument("--no-standardize", action="store_true", help="fit on the raw column scale")
        p.add_argument("--no-intercept", action="store_true", help="fit without an intercept")
        p.add_argument("--mc-init", type=_mc_init, metavar="M,SEED",
                       help="Monte Carlo starting point draws and seed (nonlinear constraints)")
    p.add_argument("--seed", type=int, required=seed_required, help="random seed")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--timing", action="store_true", help="record wall-clock time in the report")


def _tuning_flags(p):
    p.add_argument("--grid", type=_positive_int, default=50, help="number of budgets on [0, S_max]")
    p.add_argument("--folds", type=_positive_int, help="cross-validation folds (default: n, leave-one-out)")
    p.add_argument("--criterion", choices=("cv", "gcv", "bic"), default="cv")
    p.add_argument("--family", choices=("gaussian", "logistic"), default="gaussian")


def build_parser():
    parser = _Parser(prog="priorlasso", description="Lasso under prior constraints g(beta) <= 0.")
    parser.add_argument("--version", action="version", version=f"priorlasso {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser,
                                metavar="{fit,tune,bootstrap,lsa-fit,simulate}")

    p = sub.add_parser("fit", help="constrained or penalized fit")
    _common(p)
    p.add_argument("--s", type=_budget, help="L1 budget (default: none)")
    p.add_argument("--weights", type=_float_list, metavar="W1,...,WP",
                   help="budget weights; without --s, per-coefficient penalty weights")

    p = sub.add_parser("tune", help="choose the budget on a grid, then refit")
    _common(p, seed_required=True)
    _tuning_flags(p)
    p.add_argument("--curve-csv", help="also write the tuning curve as CSV")

    p = sub.add_parser("bootstrap", help="bootstrap standard errors")
    _common(p, seed_required=True)
    _tuning_flags(p)
    p.add_argument("--B", type=int, default=500, help="replicates (default: 500)")
    p.add_argument("--mode", choices=("fixed", "retune"), default="fixed")
    p.add_argument("--s", type=_budget, help="budget for fixed mode (default: none)")

    p = sub.add_parser("lsa-fit", help="fit through the least-squares approximation")
    _common(p, data=False)
    p.add_argument("--data", help="CSV file (with --family)")
    p.add_argument("--response", default="y")
    p.add_argument("--constraints")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--mc-init", type=_mc_init, metavar="M,SEED")
    p.add_argument("--no-intercept", action="store_true")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--family", choices=("gaussian", "logistic"))
    src.add_argument("--surrogate", help="JSON with beta_tilde, precision and n")
    p.add_argument("--s", type=_budget, help="L1 budget (default: none)")

    p = sub.add_parser("simulate", help="write a demo scenario")
    p.add_argument("--scenario", required=True, choices=("demand", "concavity", "synergy", "theorem2"))
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n", type=_positive_int, help="sample size (cells: rows per cell)")

    p = sub.add_parser("oracle")
    p.add_argument("--fixtures", required=True, help="directory for regenerated test fixtures")
    return parser


def load_constraints(path, p):
    """Parse a constraint file for ``p`` columns; dimension ``p + 1`` means the intercept is coordinate 1."""
    if path is None:
        return None
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    dim = infer_dimension(text)
    if dim is None:
        return None
    nl_only = all(not ln.split("#", 1)[0].strip().lower().startswith("lin")
                  for ln in text.splitlines() if ln.split("#", 1)[0].strip())
    if nl_only and dim <= p:
        dim = p
    if dim not in (p, p + 1):
        raise DataError(f"{path}: constraints have dimension {dim}, data have {p} columns")
    return parse_constraints(text, dim)


def _spec(args, cs=None, **extra):
    kw = {"sparsity_tol": args.tol}
    if getattr(args, "no_standardize", False) or (cs is not None and cs.nonlinear):
        # nonlinear constraints are always fitted on the original scale
        kw["standardize"] = False
    if getattr(args, "no_intercept", False):
        kw["intercept"] = False
    if args.mc_init is not None:
        kw["mc_draws"], kw["mc_seed"] = args.mc_init
    elif args.seed is not None:
        kw["mc_seed"] = args.seed
    kw.update(extra)
    return FitSpec(**kw)


def _inputs(args):
    out = {}
    for key in ("data", "constraints", "surrogate"):
        path = getattr(args, key, None)
        if path:
            out[key] = {"path": path, "sha256": file_digest(path)}
    return out


def _with_df(fit, cs):
    return replace(fit, df=degrees_of_freedom(fit, cs))


def _tune(data, cs, spec, args):
    from .lsa import fit_unpenalized
    from .tuning import bic_curve, cross_validate, gcv_curve, make_s_grid, surrogate_curve, surrogate_grid

    if args.family == "logistic":
        if args.criterion == "cv":
            raise UsageError("logistic tuning supports --criterion gcv or bic")
        sur = fit_unpenalized("logistic", data, spec.intercept)
        grid = surrogate_grid(sur, cs, args.grid, spec)
        return surrogate_curve(sur, cs, grid, spec, args.criterion)
    grid = make_s_grid(data, cs, args.grid, spec)
    if args.criterion == "cv":
        return cross_validate(data, cs, grid, args.folds, spec, seed=args.seed)
    return (gcv_curve if args.criterion == "gcv" else bic_curve)(data, cs, grid, spec)


def run_fit(args):
    data = read_csv(args.data, args.response)
    cs = load_constraints(args.constraints, data.p)
    if args.weights is not None and len(args.weights) != data.p:
        raise DataError(f"--weights has {len(args.weights)} entries, data have {data.p} columns")
    if args.weights is not None and args.s is None:
        spec = _spec(args, cs)
        fit = fit_penalized(data, cs, lambda1=np.array(args.weights), spec=spec)
        mode = "penalized"
    else:
        spec = _spec(args, cs, s=math.inf if args.s is None else args.s, weights=args.weights)
        fit = fit_constrained(data, cs, spec)
        mode = "constrained"
    return {"fit": fit_record(_with_df(fit, cs), data.column_names), "mode": mode}


def run_tune(args):
    data = read_csv(args.data, args.response)
    cs = load_constraints(args.constraints, data.p)
    spec = _spec(args, cs)
    curve = _tune(data, cs, spec, args)
    if args.curve_csv:
        curve.write_csv(args.curve_csv)
    final = fit_family(data, cs, spec.with_s(curve.selected_s), args.family)
    return {"tuning": tuning_record(curve), "fit": fit_record(_with_df(final, cs), data.column_names)}


def run_bootstrap(args):
    data = read_csv(args.data, args.response)
    cs = load_constraints(args.constraints, data.p)
    spec = _spec(args, cs, s=math.inf if args.s is None else args.s)
    tune = None
    if args.mode == "retune":
        tune = lambda sample: _tune(sample, cs, spec, args).selected_s  # noqa: E731
    rep = bootstrap_se(data, cs, args.B, args.mode, args.seed, spec, tune, family=args.family)
    return {"bootstrap": bootstrap_record(rep), "column_names": list(data.column_names)}


def run_lsa_fit(args):
    from .lsa import fit_lsa_constrained, fit_unpenalized, read_surrogate

    if args.surrogate:
        sur = read_surrogate(args.surrogate)
        names = [f"x{j + 1}" for j in range(sur.p)]
    else:
        if not args.data:
            raise UsageError("--family needs --data")
        data = read_csv(args.data, args.response)
        sur = fit_unpenalized(args.family, data, not args.no_intercept)
        names = list(data.column_names)
    cs = load_constraints(args.constraints, sur.p)
    spec = _spec(args, s=math.inf if args.s is None else args.s, standardize=False)
    fit = fit_lsa_constrained(sur, cs, spec)
    return {"fit": fit_record(_with_df(fit, cs), names),
            "surrogate": sur.to_json()}


def run_simulate(args):
    from .scenarios import generate, write_scenario

    sc = generate(args.scenario, args.seed, args.n)
    paths = write_scenario(sc, args.out, args.seed)
    return {"files": paths, "scenario": sc.name, "family": sc.family}


def run_oracle(args):
    from .fixtures import write_fixtures

    return {"files": write_fixtures(args.fixtures)}


COMMANDS = {"fit": run_fit, "tune": run_tune, "bootstrap": run_bootstrap, "lsa-fit": run_lsa_fit,
            "simulate": run_simulate, "oracle": run_oracle}


def run(argv) -> dict:
    """Parse ``argv`` and return the report dictionary (raises on error)."""
    return _execute(argv)[0]


def _execute(argv):
    args = build_parser().parse_args(argv)
    if args.command is None:
        raise UsageError("a command is required")
    t0 = time.perf_counter()
    body = COMMANDS[args.command](args)
    provenance = {"tool_version": __version__, "seed": getattr(args, "seed", None)}
    if args.command != "simulate" and args.command != "oracle":
        provenance["inputs"] = _inputs(args)
    if getattr(args, "timing", False):
        provenance["wall_clock_seconds"] = time.perf_counter() - t0
    body.update({"command": args.command, "config": {"argv": list(argv)}, "provenance": provenance})
    out = args.out if args.command not in ("simulate", "oracle") else None
    return body, out


def _fail(kind, code, message):
    sys.stderr.write(json.dumps({"error": kind, "exit_code": code, "message": message},
                                sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        report, out = _execute(argv)
        text = dumps(report)
        if out:
            with open(out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)
    except UsageError as exc:
        return _fail("UsageError", EXIT_USAGE, str(exc))
    except PriorLassoError as exc:
        return _fail(type(exc).__name__, exc.exit_code, str(exc))
    except (OSError, UnicodeDecodeError) as exc:
        return _fail("DataError", DataError.exit_code, str(exc))
    except ValueError as exc:
        return _fail("UsageError", EXIT_USAGE, str(exc))
    return 0


if __name__ == "__main__":
    sys.exit(main())
