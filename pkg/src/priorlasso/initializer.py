"""Monte Carlo starting points.

Draw ``Z_1..Z_m ~ N(mu, Sigma)`` with ``mu`` the least-squares estimate and
``Sigma = (X'X)^-1``, then keep the draw with the largest Gaussian
log-density among those inside the L1 budget and the prior region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constraints import ConstraintSet, evaluate_many
from .errors import DataError

_CHUNK = 8192


def _jittered_cholesky(M):
    try:
        return np.linalg.cholesky(M), 0.0
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-10 * float(np.trace(M)) / M.shape[0]
    if not jitter > 0.0:
        raise DataError("covariance matrix is singular")
    try:
        return np.linalg.cholesky(M + jitter * np.eye(M.shape[0])), jitter
    except np.linalg.LinAlgError:
        raise DataError("covariance matrix is not positive definite even after jitter") from None


@dataclass(frozen=True, eq=False)
class McConfig:
    """Sampling distribution and draw count for the Monte Carlo initializer."""

    mu: np.ndarray
    sigma: np.ndarray
    m: int = 100_000
    seed: int = 0

    def __post_init__(self):
        mu = np.array(self.mu, dtype=np.float64).reshape(-1)
        sigma = np.array(self.sigma, dtype=np.float64)
        if sigma.shape != (mu.size, mu.size):
            raise DataError(f"sigma has shape {sigma.shape}, expected {(mu.size, mu.size)}")
        if int(self.m) < 1:
            raise DataError("m must be at least 1")
        sigma = 0.5 * (sigma + sigma.T)
        chol, jitter = _jittered_cholesky(sigma)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(self, "jitter", jitter)
        object.__setattr__(self, "logdet", 2.0 * float(np.sum(np.log(np.diag(chol)))))

    @classmethod
    def from_design(cls, X, y, m=100_000, seed=0):
        """``mu = (X'X)^-1 X'y`` and ``Sigma = (X'X)^-1``, jittering a singular ``X'X``."""
        X = np.asarray(X, dtype=np.float64)
        XtX = X.T @ X
        chol, _ = _jittered_cholesky(XtX)
        inv_chol = np.linalg.solve(chol, np.eye(X.shape[1]))
        sigma = inv_chol.T @ inv_chol
        mu = sigma @ (X.T @ np.asarray(y, dtype=np.float64))
        return cls(mu, sigma, m, seed)

    @property
    def p(self):
        return self.mu.size

    def draws(self):
        """Yield ``(start_index, Z, n)`` chunks; ``Z = mu + L n`` row-wise."""
        rng = np.random.default_rng(self.seed)
        start = 0
        while start < self.m:
            size = min(_CHUNK, self.m - start)
            N = rng.standard_normal((size, self.p))
            yield start, self.mu + N @ self._chol.T, N
            start += size


def log_density(beta, cfg: McConfig) -> float:
    """``-1/2 (b - mu)' Sigma^-1 (b - mu) - 1/2 log|Sigma|`` (no 2*pi term)."""
    diff = np.asarray(beta, dtype=np.float64).reshape(-1) - cfg.mu
    if diff.size != cfg.p:
        raise DataError(f"beta has length {diff.size}, expected {cfg.p}")
    z = np.linalg.solve(cfg._chol, diff)
    return float(-0.5 * z @ z - 0.5 * cfg.logdet)


def mc_initial_point(cfg: McConfig, s: float, cs: ConstraintSet | None = None,
                     weights=None, tol: float = 1e-9):
    """Feasible draw with the largest log-density, or None if no draw is feasible.

    A draw is feasible when ``sum_j w_j |Z_j| <= s`` and every constraint
    value is ``<= 0`` (both to within ``tol``).  Ties go to the earliest draw.
    """
    if s < 0:
        raise ValueError("s must be nonnegative")
    w = np.ones(cfg.p) if weights is None else np.asarray(weights, dtype=np.float64)
    if cs is not None and cs.p != cfg.p:
        raise DataError(f"constraints have dimension {cs.p}, sampler has {cfg.p}")
    best, best_score = None, -math.inf
    for _, Z, N in cfg.draws():
        ok = np.ones(Z.shape[0], dtype=bool)
        if math.isfinite(s):
            ok &= np.abs(Z) @ w <= s + tol
        if cs is not None and cs.n_rows:
            ok &= np.all(evaluate_many(cs, Z) <= tol, axis=1)
        if not ok.any():
            continue
        # log-density of a draw reduces to -1/2 |n|^2 - 1/2 log|Sigma|
        score = np.where(ok, -0.5 * np.einsum("ij,ij->i", N, N), -np.inf)
        j = int(np.argmax(score))
        if score[j] > best_score:
            best_score = float(score[j])
            best = Z[j].copy()
    return best
