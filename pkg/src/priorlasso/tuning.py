"""Choosing the L1 budget: cross-validation, GCV and BIC over an s-grid."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .constraints import ConstraintSet
from .data import Dataset
from .errors import InfeasibleConstraints, SolverError, TuningFailed
from .estimator import FitSpec, fit_constrained, least_squares_reference
from .inference import degrees_of_freedom

DEFAULT_GRID_COUNT = 50


@dataclass(frozen=True, eq=False)
class TuningCurve:
    """Criterion values over an ascending s-grid and the selected budget.

    ``criterion`` is ``"cv(k)"``, ``"gcv"`` or ``"bic"``.  Invalid grid
    points carry ``nan`` and are excluded from the argmin.
    """

    grid: np.ndarray
    pe: np.ndarray
    valid: np.ndarray
    criterion: str
    selected_index: int
    selected_s: float
    diagnostics: dict = field(default_factory=dict)

    def records(self):
        return [{"s": float(s), "value": float(v) if ok else None, "valid": bool(ok)}
                for s, v, ok in zip(self.grid, self.pe, self.valid)]

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["s", "value", "valid"])
            for s, v, ok in zip(self.grid, self.pe, self.valid):
                w.writerow(["%.17g" % s, "%.17g" % v if ok else "", int(bool(ok))])


def _check_grid(grid):
    grid = np.asarray(grid, dtype=np.float64).reshape(-1)
    if grid.size == 0:
        raise ValueError("grid must not be empty")
    if np.any(np.diff(grid) < 0) or np.any(grid < 0) or np.any(np.isnan(grid)):
        raise ValueError("grid must be nonnegative and ascending")
    return grid


def select(grid, pe, valid, criterion, diagnostics=None) -> TuningCurve:
    """Argmin of ``pe`` over valid points; the first (smallest s) wins ties."""
    grid = _check_grid(grid)
    pe = np.asarray(pe, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool) & np.isfinite(pe)
    if not valid.any():
        raise TuningFailed(f"every grid point failed under {criterion}")
    masked = np.where(valid, pe, np.inf)
    i = int(np.flatnonzero(masked == masked.min())[0])
    pe = np.where(valid, pe, np.nan)
    return TuningCurve(grid, pe, valid, criterion, i, float(grid[i]), diagnostics or {})


def make_s_grid(data: Dataset, cs: ConstraintSet | None = None, count=DEFAULT_GRID_COUNT,
                spec: FitSpec | None = None):
    """``count`` equally spaced budgets on ``[0, S_max]``.

    ``S_max`` is the weighted L1 norm of the least-squares fit under the
    linear prior rows.
    """
    if count < 2:
        raise ValueError("grid count must be at least 2")
    ref = least_squares_reference(data, cs, spec)
    return np.linspace(0.0, ref.l1_norm, int(count))


def fold_assignment(n, folds, seed):
    """Held-out row sets: one row each (in order) for ``folds == n``, else a seeded shuffle."""
    if not 2 <= folds <= n:
        raise ValueError(f"folds must be between 2 and n={n}, got {folds}")
    if folds == n:
        return [np.array([j]) for j in range(n)]
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


def cross_validate(data: Dataset, cs: ConstraintSet | None = None, grid=None, folds=None,
                   spec: FitSpec | None = None, seed=0) -> TuningCurve:
    """Summed held-out squared prediction error for each budget.

    ``folds`` defaults to ``n`` (leave-one-out).  A budget whose training
    fit fails in any fold is marked invalid.
    """
    spec = spec or FitSpec()
    grid = _check_grid(make_s_grid(data, cs, spec=spec) if grid is None else grid)
    folds = data.n if folds is None else int(folds)
    held = fold_assignment(data.n, folds, seed)
    pe = np.zeros(grid.size)
    valid = np.ones(grid.size, dtype=bool)
    failures = []
    for test in held:
        train = data.subset(np.setdiff1d(np.arange(data.n), test))
        Xt = data.X[test]
        yt = data.y[test]
        for i, s in enumerate(grid):
            if not valid[i]:
                continue
            try:
                fit = fit_constrained(train, cs, spec.with_s(s))
            except (SolverError, InfeasibleConstraints) as exc:
                valid[i] = False
                failures.append({"s": float(s), "error": str(exc)})
                continue
            r = yt - fit.predict(Xt)
            pe[i] += float(r @ r)
    return select(grid, pe, valid, f"cv({folds})", {"failures": failures, "seed": seed})


def _information_curve(grid, fit_at, rss_of, n, cs, spec, kind):
    values = np.full(grid.size, np.nan)
    valid = np.zeros(grid.size, dtype=bool)
    dfs = []
    notes = []
    for i, s in enumerate(grid):
        try:
            fit = fit_at(s)
        except (SolverError, InfeasibleConstraints) as exc:
            dfs.append(None)
            notes.append({"s": float(s), "error": str(exc)})
            continue
        df = degrees_of_freedom(fit, cs, spec.feasibility_tol)
        dfs.append(df)
        rss = rss_of(fit)
        if kind == "gcv":
            if df >= n:
                notes.append({"s": float(s), "error": "df >= n"})
                continue
            values[i] = rss / (n * (1.0 - df / n) ** 2)
        else:
            if not rss > 0.0:
                notes.append({"s": float(s), "error": "RSS is 0; log undefined"})
                continue
            values[i] = n * math.log(rss / n) + math.log(n) * df
        valid[i] = True
    return select(grid, values, valid, kind, {"df": dfs, "failures": notes})


def gcv_curve(data: Dataset, cs: ConstraintSet | None = None, grid=None, spec: FitSpec | None = None):
    """``RSS(s) / (n (1 - df(s)/n)^2)`` per budget; points with ``df >= n`` are invalid."""
    spec = spec or FitSpec()
    grid = _check_grid(make_s_grid(data, cs, spec=spec) if grid is None else grid)
    return _information_curve(grid, lambda s: fit_constrained(data, cs, spec.with_s(s)),
                              lambda f: f.objective, data.n, cs, spec, "gcv")


def bic_curve(data: Dataset, cs: ConstraintSet | None = None, grid=None, spec: FitSpec | None = None):
    """``n log(RSS(s)/n) + log(n) df(s)`` per budget; ``RSS = 0`` points are invalid."""
    spec = spec or FitSpec()
    grid = _check_grid(make_s_grid(data, cs, spec=spec) if grid is None else grid)
    return _information_curve(grid, lambda s: fit_constrained(data, cs, spec.with_s(s)),
                              lambda f: f.objective, data.n, cs, spec, "bic")


def surrogate_curve(surrogate, cs, grid, spec: FitSpec, kind):
    """GCV or BIC for an LSA surrogate with the loss-scale pseudo-RSS."""
    from .lsa import fit_lsa_constrained, pseudo_rss

    if kind not in ("gcv", "bic"):
        raise ValueError("surrogate tuning supports gcv and bic only")
    grid = _check_grid(grid)
    cs_user = cs
    return _information_curve(grid, lambda s: fit_lsa_constrained(surrogate, cs, spec.with_s(s)),
                              lambda f: pseudo_rss(surrogate, f), surrogate.n, cs_user, spec, kind)


def surrogate_grid(surrogate, cs, count=DEFAULT_GRID_COUNT, spec: FitSpec | None = None):
    """Grid on ``[0, S_max]`` with ``S_max`` from the surrogate fit under the linear rows."""
    from dataclasses import replace

    from .lsa import fit_lsa_constrained

    if count < 2:
        raise ValueError("grid count must be at least 2")
    spec = replace(spec or FitSpec(), s=math.inf)
    ref = fit_lsa_constrained(surrogate, None if cs is None else cs.linear_only(), spec)
    return np.linspace(0.0, ref.l1_norm, int(count))
