"""Degrees of freedom and bootstrap standard errors."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .constraints import ConstraintSet, evaluate
from .data import Dataset
from .errors import DataError, InfeasibleConstraints, SolverError
from .estimator import FitResult, FitSpec, fit_constrained


def constraint_point(fit: FitResult, cs: ConstraintSet):
    """Coefficients in the coordinates of ``cs`` (``p`` or ``p + 1`` with the intercept first)."""
    if cs.p == fit.beta.size:
        return fit.beta
    if cs.p == fit.beta.size + 1:
        return np.concatenate([[fit.intercept], fit.beta])
    raise DataError(f"constraints have dimension {cs.p}, fit has {fit.beta.size} coefficients")


def active_count(fit: FitResult, cs: ConstraintSet | None, tol=1e-9) -> int:
    """Inequality and nonlinear rows with ``|g| <= tol`` plus every equality row."""
    if cs is None or cs.n_rows == 0:
        return 0
    vals = evaluate(cs, constraint_point(fit, cs))
    ineq = np.abs(vals[:cs.n_ineq]) <= tol
    nl = np.abs(vals[cs.n_ineq + 2 * cs.n_eq:]) <= tol
    return int(ineq.sum() + nl.sum() + cs.n_eq)


def degrees_of_freedom(fit: FitResult, cs: ConstraintSet | None = None, tol=1e-9,
                       sparsity_tol=None) -> int:
    """``p - #{beta_j = 0} - #{g_k(beta) = 0}``, floored at 0.

    Zeros are taken from ``fit.zero_set`` unless ``sparsity_tol`` is given,
    in which case ``|beta_j| <= sparsity_tol`` counts as zero.  The intercept
    is not counted in ``p``.
    """
    p = fit.beta.size
    if sparsity_tol is None:
        zeros = len(fit.zero_set)
    else:
        zeros = int(np.sum(np.abs(fit.beta) <= sparsity_tol))
    return max(0, p - zeros - active_count(fit, cs, tol))


class BootstrapMode(str, enum.Enum):
    FIXED = "fixed"
    RETUNE = "retune"


@dataclass(frozen=True, eq=False)
class BootstrapReport:
    """Replicate summary.

    ``se`` is the per-coefficient sample standard deviation (``ddof=1``)
    over successful replicates, ``selection_freq`` the fraction of
    successful replicates with a nonzero estimate.  ``reliable`` is false
    when at least half of the replicates failed.
    """

    B: int
    mode: BootstrapMode
    se: np.ndarray
    selection_freq: np.ndarray
    seed: int
    failures: int
    mean: np.ndarray
    selected_s: tuple = ()
    sigma_hat: float = math.nan
    failure_messages: tuple = ()
    extra: dict = field(default_factory=dict)

    @property
    def reliable(self):
        return self.failures < self.B / 2


def replicate_rows(n, seed, index):
    """Row indices of bootstrap replicate ``index`` (drawn from ``seed + index``)."""
    return np.random.default_rng(seed + index).integers(0, n, size=n)


def summarize(estimates, B, mode, seed, failures, messages=(), selected_s=(), sigma_hat=math.nan,
              p=None, extra=None) -> BootstrapReport:
    """Moments of the successful replicate estimates."""
    ok = [e for e in estimates if e is not None]
    if ok:
        E = np.vstack(ok)
        se = E.std(axis=0, ddof=1) if E.shape[0] > 1 else np.full(E.shape[1], math.nan)
        freq = np.mean(E != 0.0, axis=0)
        mean = E.mean(axis=0)
    else:
        se = freq = mean = np.full(p or 0, math.nan)
    return BootstrapReport(B, BootstrapMode(mode), se, freq, seed, failures, mean, tuple(selected_s),
                           sigma_hat, tuple(messages), extra or {})


def fit_family(data: Dataset, cs, spec: FitSpec, family="gaussian") -> FitResult:
    """Budget fit for the Gaussian family or, through the LSA surrogate, the logistic one."""
    if family == "gaussian":
        return fit_constrained(data, cs, spec)
    from .lsa import fit_lsa_constrained, fit_unpenalized

    return fit_lsa_constrained(fit_unpenalized(family, data, spec.intercept), cs, spec)


def bootstrap_se(data: Dataset, cs: ConstraintSet | None = None, B=500, mode="fixed", seed=0,
                 spec: FitSpec | None = None, tune=None, family="gaussian") -> BootstrapReport:
    """Case-resampling bootstrap of the constrained lasso.

    Parameters
    ----------
    data : Dataset
    cs : ConstraintSet, optional
    B : int
        Number of replicates, at least 2.
    mode : {"fixed", "retune"}
        ``fixed`` refits at ``spec.s``; ``retune`` calls ``tune(resample)``
        on every replicate, which must return the budget to use.
    seed : int
        Replicate ``b`` resamples rows with ``numpy.random.default_rng(seed + b)``.
    spec : FitSpec, optional
    tune : callable, optional
        Required for ``retune``.
    family : {"gaussian", "logistic"}
        Logistic replicates refit the surrogate on each resample.

    Returns
    -------
    BootstrapReport
    """
    if B < 2:
        raise ValueError("B must be at least 2")
    mode = BootstrapMode(mode)
    spec = spec or FitSpec()
    if mode is BootstrapMode.RETUNE and tune is None:
        raise ValueError("retune mode needs a tuning callable")

    estimates, messages, chosen = [], [], []
    failures = 0
    for b in range(B):
        sample = data.subset(replicate_rows(data.n, seed, b))
        try:
            s = tune(sample) if mode is BootstrapMode.RETUNE else spec.s
            fit = fit_family(sample, cs, spec.with_s(s), family)
        except (SolverError, InfeasibleConstraints, DataError) as exc:
            failures += 1
            messages.append(f"replicate {b}: {exc}")
            estimates.append(None)
            continue
        if mode is BootstrapMode.RETUNE:
            chosen.append(float(s))
        estimates.append(fit.beta)

    sigma = math.nan
    if family == "gaussian":
        # residual scale of the full-data fit
        try:
            full = fit_constrained(data, cs, spec if mode is BootstrapMode.FIXED else spec.with_s(tune(data)))
            df = degrees_of_freedom(full, cs, spec.feasibility_tol)
            if data.n - df - 1 > 0:
                sigma = math.sqrt(full.objective / (data.n - df - 1))
        except (SolverError, InfeasibleConstraints):
            pass
    p = data.p if cs is None or cs.p == data.p else cs.p - 1
    return summarize(estimates, B, mode, seed, failures, messages, chosen, sigma, p)
