"""Independent brute-force references for the test suite.

Nothing here calls the QP solver or the estimator's numerical code; the
only shared pieces are plain numpy matrix products and the data containers.
These routines are slow by design.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import NoFeasiblePoint

DEFAULT_MAX_POINTS = 10 ** 8
_CHUNK_POINTS = 1 << 20


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned grid: ``lower[j] + k * resolution`` up to ``upper[j]``."""

    lower: tuple
    upper: tuple
    resolution: float
    max_points: int = DEFAULT_MAX_POINTS

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        if len(self.lower) != len(self.upper):
            raise ValueError("lower and upper bounds differ in length")
        if any(u < l for l, u in zip(self.lower, self.upper)):
            raise ValueError("upper bound below lower bound")
        if self.size > self.max_points:
            raise ValueError(f"grid has {self.size} points, more than max_points={self.max_points}")

    def axes(self):
        return [l + self.resolution * np.arange(int(math.floor((u - l) / self.resolution + 1e-9)) + 1)
                for l, u in zip(self.lower, self.upper)]

    @property
    def size(self):
        return math.prod(int(math.floor((u - l) / self.resolution + 1e-9)) + 1
                         for l, u in zip(self.lower, self.upper))


def _centered(X, y, intercept):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if intercept:
        return X - X.mean(axis=0), y - y.mean()
    return X, y


def _feasible_mask(B, cs, s, weights, eq_tol):
    ok = np.ones(B.shape[0], dtype=bool)
    if math.isfinite(s):
        ok &= np.abs(B) @ weights <= s + 1e-12
    if cs is not None:
        for row, rhs in zip(cs.A, cs.a):
            ok &= B @ row <= rhs + 1e-12
        for row, rhs in zip(cs.E, cs.e):
            ok &= np.abs(B @ row - rhs) <= eq_tol * np.abs(row).sum()
        for con in cs.nonlinear:
            i, j, k = con.indices()
            ok &= B[:, k] ** 2 - B[:, i] * B[:, j] <= 1e-12
    return ok


def brute_force_fit(X, y, cs, s, grid: GridSpec, weights=None, intercept=False):
    """Exhaustive scan for the least-squares minimizer under the budget and constraints.

    Returns ``(beta, objective)``; ``objective`` is the residual sum of
    squares (about the optimal intercept when ``intercept`` is set).  Ties go
    to the lexicographically smallest point.  Equality rows are accepted
    within half a grid step.

    Raises
    ------
    NoFeasiblePoint
        No grid point satisfies the constraints.
    """
    Xc, yc = _centered(X, y, intercept)
    p = Xc.shape[1]
    if p > 4:
        raise ValueError("brute force is limited to p <= 4")
    if len(grid.lower) != p:
        raise ValueError(f"grid has {len(grid.lower)} axes for {p} coefficients")
    w = np.ones(p) if weights is None else np.asarray(weights, dtype=np.float64)
    G = Xc.T @ Xc
    h = Xc.T @ yc
    yy = float(yc @ yc)
    axes = grid.axes()
    best, best_val = None, math.inf
    # enumerate the leading axes in C order, the last axis vectorized in chunks
    lead = itertools.product(*[range(a.size) for a in axes[:-1]])
    last = axes[-1]
    block = max(1, _CHUNK_POINTS // last.size)
    while True:
        heads = list(itertools.islice(lead, block))
        if not heads:
            break
        H = np.array([[axes[d][i] for d, i in enumerate(hd)] for hd in heads]).reshape(len(heads), p - 1)
        B = np.hstack([np.repeat(H, last.size, axis=0), np.tile(last, len(heads))[:, None]])
        ok = _feasible_mask(B, cs, s, w, 0.5 * grid.resolution)
        if not ok.any():
            continue
        Bf = B[ok]
        vals = yy - 2.0 * Bf @ h + np.einsum("ij,jk,ik->i", Bf, G, Bf)
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val = float(vals[i])
            best = Bf[i].copy()
    if best is None:
        raise NoFeasiblePoint("no grid point satisfies the constraints")
    return best, best_val


def refined_grid_fit(X, y, cs, s, lower, upper, resolution=1e-3, weights=None, intercept=False,
                     coarse_points=41, window=4):
    """Coarse-to-fine exhaustive scans down to ``resolution``.

    Each level scans a full grid around the previous optimum (``window``
    steps of the previous level either side).  Returns ``(beta, objective)``.
    """
    p = len(lower)
    lo = np.array(lower, dtype=np.float64)
    hi = np.array(upper, dtype=np.float64)
    step = max((hi - lo).max() / (coarse_points - 1), resolution)
    beta, val = brute_force_fit(X, y, cs, s, GridSpec(tuple(lo), tuple(hi), step), weights, intercept)
    while step > resolution:
        new = max(step / 10.0, resolution)
        a = np.maximum(lo, beta - window * step)
        b = np.minimum(hi, beta + window * step)
        # align the window to the global lattice with spacing ``new``
        a = lo + np.floor((a - lo) / new + 1e-9) * new
        beta, val = brute_force_fit(X, y, cs, s, GridSpec(tuple(a), tuple(b), new), weights, intercept)
        step = new
    return beta, val


def polish(X, y, cs, s, start, weights=None, intercept=False):
    """Local SLSQP refinement on ``(beta_plus, beta_minus)`` from a grid point."""
    Xc, yc = _centered(X, y, intercept)
    p = Xc.shape[1]
    w = np.ones(p) if weights is None else np.asarray(weights, dtype=np.float64)

    def split(z):
        return z[:p] - z[p:]

    def obj(z):
        r = yc - Xc @ split(z)
        return float(r @ r)

    def grad(z):
        g = -2.0 * Xc.T @ (yc - Xc @ split(z))
        return np.concatenate([g, -g])

    cons = []
    if math.isfinite(s):
        cons.append({"type": "ineq", "fun": lambda z: s - w @ (z[:p] + z[p:]),
                     "jac": lambda z: -np.concatenate([w, w])})
    if cs is not None:
        for row, rhs in zip(cs.A, cs.a):
            cons.append({"type": "ineq", "fun": lambda z, r=row, c=rhs: c - r @ split(z),
                         "jac": lambda z, r=row: -np.concatenate([r, -r])})
        for row, rhs in zip(cs.E, cs.e):
            cons.append({"type": "eq", "fun": lambda z, r=row, c=rhs: r @ split(z) - c,
                         "jac": lambda z, r=row: np.concatenate([r, -r])})
    start = np.asarray(start, dtype=np.float64)
    z0 = np.concatenate([np.maximum(start, 0.0), np.maximum(-start, 0.0)])
    res = minimize(obj, z0, jac=grad, constraints=cons, bounds=[(0.0, None)] * (2 * p),
                   method="SLSQP", options={"ftol": 1e-15, "maxiter": 1000})
    beta = split(res.x)
    return beta, obj(res.x)


def naive_loo_cv(data, cs, grid_of_s, fit_fn):
    """Literal leave-one-out double loop: ``PE_s = sum_j (y_j - yhat_j^{(-j)})^2``.

    ``fit_fn(train, cs, s)`` must return an object with ``beta`` and
    ``intercept``.
    """
    if data.n > 200:
        raise ValueError("naive LOO is limited to n <= 200")
    out = []
    for s in grid_of_s:
        total = 0.0
        for j in range(data.n):
            rows = [i for i in range(data.n) if i != j]
            fit = fit_fn(data.subset(rows), cs, s)
            pred = float(data.X[j] @ fit.beta) + fit.intercept
            total += (data.y[j] - pred) ** 2
        out.append(total)
    return np.array(out)


def newton_logistic(X, y, tol=1e-12, max_iter=200):
    """Plain Newton iteration on the logistic log-likelihood."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    beta = np.zeros(X.shape[1])
    for _ in range(max_iter):
        eta = X @ beta
        mu = np.where(eta >= 0, 1.0 / (1.0 + np.exp(-np.abs(eta))), np.exp(-np.abs(eta)) / (1.0 + np.exp(-np.abs(eta))))
        g = X.T @ (y - mu)
        Hm = (X * (mu * (1 - mu))[:, None]).T @ X
        step = np.linalg.solve(Hm, g)
        beta = beta + step
        if np.max(np.abs(step)) < tol:
            break
    return beta


def project_l1(z, s, nonneg=()):
    """Euclidean projection of ``z`` onto ``{sum |b| <= s, b_j >= 0 for j in nonneg}`` by sorting."""
    z = np.array(z, dtype=np.float64)
    for j in nonneg:
        z[j] = max(z[j], 0.0)
    a = np.abs(z)
    if a.sum() <= s:
        return z
    if s == 0:
        return np.zeros_like(z)
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    rho = int(np.flatnonzero(u - (css - s) / k > 0)[-1])
    theta = (css[rho] - s) / (rho + 1)
    return np.sign(z) * np.maximum(a - theta, 0.0)


def soft_threshold(z, lam):
    """``argmin |b - z|^2 + lam |b|_1`` = ``sign(z) max(|z| - lam/2, 0)``."""
    z = np.asarray(z, dtype=np.float64)
    return np.sign(z) * np.maximum(np.abs(z) - lam / 2.0, 0.0)


def ols_standard_errors(X, y, intercept=True):
    """Classical ``sigma sqrt(diag((X'X)^-1))`` for the slope coefficients."""
    X = np.asarray(X, dtype=np.float64)
    if intercept:
        X = np.hstack([np.ones((X.shape[0], 1)), X])
    beta = np.linalg.solve(X.T @ X, X.T @ y)
    r = y - X @ beta
    sigma2 = float(r @ r) / (X.shape[0] - X.shape[1])
    se = np.sqrt(sigma2 * np.diag(np.linalg.inv(X.T @ X)))
    return se[1:] if intercept else se


def qp_grid(Q, c, A, b, lower, upper, resolution):
    """Grid minimizer of ``1/2 x'Qx + c'x`` subject to ``A x <= b`` (2-D or 3-D)."""
    axes = [l + resolution * np.arange(int(round((u - l) / resolution)) + 1) for l, u in zip(lower, upper)]
    P = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
    ok = np.all(P @ np.asarray(A).T <= np.asarray(b) + 1e-12, axis=1)
    P = P[ok]
    vals = 0.5 * np.einsum("ij,jk,ik->i", P, Q, P) + P @ c
    return P[int(np.argmin(vals))]
