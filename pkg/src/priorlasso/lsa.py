"""Least-squares approximation of smooth losses.

A loss ``L_n`` is replaced by its quadratic expansion at the unpenalized
minimizer ``beta_tilde``::

    lsa_loss(beta) = (beta - beta_tilde)' P (beta - beta_tilde),   P = L_n''(beta_tilde) / n

so ``lsa_loss(beta) ~ 2 (L_n(beta) - L_n(beta_tilde)) / n`` near
``beta_tilde``.  Loss conventions: Gaussian ``L_n`` is the residual sum of
squares, logistic ``L_n`` is the deviance (``-2`` times the log-likelihood).
Coefficient vectors include the intercept as coordinate 0 when the
surrogate has one.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .constraints import ConstraintSet
from .data import Dataset
from .errors import DataError, NonConvergence, SeparationDetected
from .estimator import FitResult, FitSpec, prepare_quadratic, solve_working


SATURATION = 36.0


class Family(str, enum.Enum):
    GAUSSIAN = "gaussian"
    LOGISTIC = "logistic"
    EXTERNAL = "external"


@dataclass(frozen=True, eq=False)
class LsaSurrogate:
    """Quadratic surrogate ``(beta - beta_tilde)' precision (beta - beta_tilde)``."""

    beta_tilde: np.ndarray
    precision: np.ndarray
    n: int
    loss_value: float = math.nan
    family: Family = Family.EXTERNAL
    intercept: bool = False
    column_names: tuple | None = None

    def __post_init__(self):
        b = np.array(self.beta_tilde, dtype=np.float64).reshape(-1)
        P = np.array(self.precision, dtype=np.float64)
        if P.shape != (b.size, b.size):
            raise DataError(f"precision has shape {P.shape}, expected {(b.size, b.size)}")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(P))):
            raise DataError("surrogate contains non-finite values")
        if int(self.n) < 1:
            raise DataError("surrogate sample count must be positive")
        P = 0.5 * (P + P.T)
        if np.linalg.eigvalsh(P)[0] < -1e-10 * max(1.0, np.abs(P).max()):
            raise DataError("precision matrix is not positive semidefinite")
        b.setflags(write=False)
        P.setflags(write=False)
        object.__setattr__(self, "beta_tilde", b)
        object.__setattr__(self, "precision", P)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "family", Family(self.family))

    @property
    def p(self):
        """Number of coefficients excluding the intercept."""
        return self.beta_tilde.size - (1 if self.intercept else 0)

    def to_json(self):
        return {
            "beta_tilde": [float(v) for v in self.beta_tilde],
            "precision": [[float(v) for v in row] for row in self.precision],
            "n": self.n,
            "loss_value": None if math.isnan(self.loss_value) else float(self.loss_value),
            "family": self.family.value,
            "intercept": self.intercept,
        }


def read_surrogate(path) -> LsaSurrogate:
    """Load ``{"beta_tilde": [...], "precision": [[...]], "n": int}`` (``intercept`` optional)."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    missing = [k for k in ("beta_tilde", "precision", "n") if k not in raw]
    if missing:
        raise DataError(f"{path}: missing keys {missing}")
    loss = raw.get("loss_value")
    return LsaSurrogate(raw["beta_tilde"], raw["precision"], raw["n"],
                        math.nan if loss is None else float(loss),
                        Family.EXTERNAL, bool(raw.get("intercept", False)))


def _design(data: Dataset, intercept: bool):
    if intercept and not data.has_intercept_column:
        return data.with_intercept_column().X, True
    return data.X, data.has_intercept_column


def deviance(X, y, beta):
    """Logistic deviance ``-2 sum [y eta - log(1 + exp(eta))]``."""
    eta = X @ beta
    return float(2.0 * np.sum(np.logaddexp(0.0, eta) - y * eta))


def fit_unpenalized(family, data: Dataset, intercept=True, *, tol=1e-8, max_iter=100,
                    divergence_bound=1e3) -> LsaSurrogate:
    """Unpenalized fit and curvature defining the surrogate.

    Parameters
    ----------
    family : {"gaussian", "logistic"}
    data : Dataset
    intercept : bool
        Prepend a constant column (unless the data already carry one).
    tol : float
        Logistic stopping rule on the max-norm of the deviance gradient.
    max_iter : int
        IRLS iteration cap.
    divergence_bound : float
        IRLS stops with ``SeparationDetected`` once any ``|beta_j|`` exceeds it.
        Fits whose linear predictor reaches ``SATURATION`` in absolute value
        (probabilities within about 1e-16 of 0 or 1) are also treated as
        separated, since the score vanishes there before the norm diverges.

    Returns
    -------
    LsaSurrogate
    """
    family = Family(family)
    X, has_icpt = _design(data, intercept)
    y = data.y
    n = data.n
    if family is Family.GAUSSIAN:
        beta, *_ = np.linalg.lstsq(X, y, rcond=None)
        r = y - X @ beta
        return LsaSurrogate(beta, 2.0 * X.T @ X / n, n, float(r @ r), family, has_icpt, data.column_names)
    if family is not Family.LOGISTIC:
        raise ValueError(f"cannot fit family {family.value!r}")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise DataError("logistic responses must be 0 or 1")

    beta = np.zeros(X.shape[1])
    for _ in range(max_iter):
        eta = X @ beta
        if np.max(np.abs(eta)) > SATURATION:
            raise SeparationDetected("fitted probabilities reached 0 or 1 during IRLS; the data look separable")
        pi = expit(eta)
        score = X.T @ (y - pi)
        if 2.0 * np.max(np.abs(score)) <= tol:
            break
        w = pi * (1.0 - pi)
        info = X.T @ (X * w[:, None])
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            raise SeparationDetected("information matrix became singular during IRLS") from None
        beta = beta + step
        if not np.all(np.isfinite(beta)) or np.max(np.abs(beta)) > divergence_bound:
            raise SeparationDetected(
                f"coefficients exceeded {divergence_bound:g} during IRLS; the data look separable")
    else:
        raise NonConvergence(f"IRLS did not converge in {max_iter} iterations")
    pi = expit(X @ beta)
    w = pi * (1.0 - pi)
    precision = 2.0 * X.T @ (X * w[:, None]) / n
    return LsaSurrogate(beta, precision, n, deviance(X, y, beta), family, has_icpt, data.column_names)


def lsa_loss(surrogate: LsaSurrogate, beta) -> float:
    beta = np.asarray(beta, dtype=np.float64).reshape(-1)
    if beta.size != surrogate.beta_tilde.size:
        raise DataError(f"beta has length {beta.size}, surrogate has {surrogate.beta_tilde.size}")
    d = beta - surrogate.beta_tilde
    return float(d @ surrogate.precision @ d)


def full_coefficients(surrogate: LsaSurrogate, fit: FitResult):
    """Fitted coefficients in surrogate coordinates (intercept first when present)."""
    if surrogate.intercept:
        return np.concatenate([[fit.intercept], fit.beta])
    return fit.beta


def _surrogate_constraints(surrogate, cs):
    P = surrogate.beta_tilde.size
    if cs is None:
        return ConstraintSet.empty(P)
    if cs.p == P:
        return cs
    if surrogate.intercept and cs.p == P - 1:
        return cs.with_leading_column()
    raise DataError(f"constraints have dimension {cs.p}, surrogate has {surrogate.p} coefficients")


def fit_lsa_constrained(surrogate: LsaSurrogate, cs: ConstraintSet | None = None,
                        spec: FitSpec | None = None) -> FitResult:
    """Constrained lasso on the surrogate: ``Q = 2P``, ``c = -2 P beta_tilde``.

    The intercept (when present) is outside the budget.  ``objective`` on the
    result is ``lsa_loss`` at the fitted coefficients.
    """
    spec = spec or FitSpec()
    P, bt = surrogate.precision, surrogate.beta_tilde
    cs_full = _surrogate_constraints(surrogate, cs)
    mc_mean = mc_cov = None
    if cs_full.nonlinear:
        # sampling distribution N(beta_tilde, (n P / 2)^-1) matches the Gaussian case
        mc_mean = bt
        mc_cov = np.linalg.pinv(surrogate.n * P / 2.0, hermitian=True)
    work = prepare_quadratic(2.0 * P, -2.0 * P @ bt, float(bt @ P @ bt), cs_full, spec,
                             intercept_first=surrogate.intercept, mc_mean=mc_mean, mc_cov=mc_cov)
    return solve_working(work, spec)


def pseudo_rss(surrogate: LsaSurrogate, fit: FitResult) -> float:
    """Loss-scale fit criterion ``L_n(beta_tilde) + n/2 lsa_loss(beta_hat)``.

    Equals the residual sum of squares exactly for the Gaussian family and
    approximates the deviance for the logistic one.
    """
    if math.isnan(surrogate.loss_value):
        raise DataError("surrogate has no loss_value; criteria on the loss scale are unavailable")
    return surrogate.loss_value + 0.5 * surrogate.n * lsa_loss(surrogate, full_coefficients(surrogate, fit))
