"""Constrained lasso fits.

The budget form solves::

    minimize |y - X beta|^2  subject to  sum_j w_j |beta_j| <= s,  g(beta) <= 0

by writing ``beta = beta_plus - beta_minus`` with both parts nonnegative, which
turns the L1 budget into one linear row of a ``2p``-variable QP.  Nonlinear
constraints enter through sequential outer linearization.  The penalized form
replaces the budget by ``sum_j lambda_j |beta_j|`` in the objective and can
optionally move ``g`` into the objective with fixed multipliers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .constraints import ConstraintSet, evaluate, outer_cuts
from .data import Dataset
from .errors import DataError, InfeasibleConstraints, LinearizationStalled, QpFailure
from .initializer import McConfig, mc_initial_point
from .qp import QpOptions, QpProblem, QpStatus, solve_qp

_MAX_SPARSIFY_ROUNDS = 3
_BISECTION_STEPS = 60
_SQP_STEP_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class FitSpec:
    """Options for a single fit.

    ``s`` is the L1 budget (``inf`` for none) and ``weights`` the optional
    per-coefficient budget weights.  Coefficients with ``|beta_j| <=
    sparsity_tol`` are set to exactly zero.  ``mc_draws`` and ``mc_seed``
    control the Monte Carlo starting point used with nonlinear constraints.
    """

    s: float = math.inf
    weights: np.ndarray | None = None
    sparsity_tol: float = 1e-6
    standardize: bool = True
    intercept: bool = True
    sl_max_rounds: int = 30
    sl_tol: float = 1e-8
    feasibility_tol: float = 1e-9
    kkt_tol: float = 1e-8
    mc_draws: int = 10_000
    mc_seed: int = 0
    backend: str | None = None

    def __post_init__(self):
        s = float(self.s)
        if math.isnan(s) or s < 0:
            raise ValueError(f"budget s must be nonnegative, got {self.s}")
        object.__setattr__(self, "s", s)
        if self.weights is not None:
            w = np.array(self.weights, dtype=np.float64).reshape(-1)
            if np.any(~np.isfinite(w)) or np.any(w < 0):
                raise ValueError("weights must be finite and nonnegative")
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)
        for name in ("sparsity_tol", "sl_tol", "feasibility_tol", "kkt_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.sl_max_rounds < 1 or self.mc_draws < 1:
            raise ValueError("sl_max_rounds and mc_draws must be at least 1")

    def with_s(self, s):
        return replace(self, s=s)


@dataclass(frozen=True, eq=False)
class FitResult:
    """Fitted coefficients (original scale) and diagnostics.

    ``constraint_point`` is the coefficient vector in the coordinates of the
    constraint set, i.e. ``beta`` or ``(intercept, beta)`` when the
    constraint file addresses the intercept.
    """

    beta: np.ndarray
    intercept: float
    l1_norm: float
    objective: float
    active_constraints: tuple
    zero_set: tuple
    df: int | None = None
    solver_info: dict = field(default_factory=dict)
    constraint_point: np.ndarray | None = None

    def predict(self, X):
        return np.asarray(X, dtype=np.float64) @ self.beta + self.intercept


def sparsify(beta, tol):
    """Set entries with ``|beta_j| <= tol`` to exactly 0; return ``(beta, zero_set)``."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    beta = np.array(beta, dtype=np.float64, copy=True)
    small = np.abs(beta) <= tol
    beta[small] = 0.0
    return beta, tuple(int(j) for j in np.flatnonzero(small))


@dataclass(eq=False)
class QuadraticModel:
    """Objective ``1/2 t'Ht + f't + const`` over working coordinates ``t``.

    ``budget_weights`` are the L1 weights in working coordinates,
    ``penalized`` marks the coordinates subject to sparsification, and
    ``cs`` is the constraint set in working coordinates.  ``mc_mean`` and
    ``mc_cov`` define the Monte Carlo sampler (only needed with nonlinear
    constraints).
    """

    H: np.ndarray
    f: np.ndarray
    const: float
    budget_weights: np.ndarray
    penalized: np.ndarray
    cs: ConstraintSet
    mc_mean: np.ndarray | None = None
    mc_cov: np.ndarray | None = None

    @property
    def P(self):
        return self.H.shape[0]


@dataclass(eq=False)
class _Working:
    model: QuadraticModel
    scale: np.ndarray
    column_intercept: bool
    cs: ConstraintSet
    weights: np.ndarray
    unpack: Callable
    objective: Callable
    notes: list = field(default_factory=list)


def _resolve_weights(weights, p):
    if weights is None:
        return np.ones(p)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (p,):
        raise DataError(f"expected {p} weights, got {w.size}")
    return w


def _moments(H, f, cov_factor):
    """Unconstrained minimizer of the model and ``cov_factor * H^-1``."""
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        L = np.linalg.cholesky(H + 1e-10 * float(np.trace(H)) / H.shape[0] * np.eye(H.shape[0]))
    Linv = np.linalg.solve(L, np.eye(H.shape[0]))
    Hinv = Linv.T @ Linv
    return -Hinv @ f, cov_factor * Hinv


def _standardize_off(cs, standardize, notes):
    if standardize and cs.nonlinear:
        msg = "standardize disabled: nonlinear constraints are fitted on the original scale"
        warnings.warn(msg, stacklevel=4)
        notes.append(msg)
        return False
    return standardize


def prepare_gaussian(data: Dataset, cs: ConstraintSet | None, spec: FitSpec) -> _Working:
    """Center or augment the design, standardize, and express everything in working coordinates."""
    if cs is None:
        cs = ConstraintSet.empty(data.p)
    if not data.has_intercept_column and cs.p == data.p + 1:
        if not spec.intercept:
            raise DataError("constraints include an intercept coordinate but the fit has no intercept")
        data = data.with_intercept_column()
    p_user = data.p - (1 if data.has_intercept_column else 0)
    if cs.p != data.p:
        raise DataError(f"constraints have dimension {cs.p}, data has {p_user} predictors")

    weights = _resolve_weights(spec.weights, p_user)
    X, y = data.X, data.y
    column = data.has_intercept_column
    if column:
        Xw, yw = X, y
        w_full = np.concatenate([[0.0], weights])
        penalized = np.concatenate([[False], np.ones(p_user, dtype=bool)])
        x_mean, y_mean = None, 0.0
    else:
        w_full = weights
        penalized = np.ones(p_user, dtype=bool)
        if spec.intercept:
            x_mean = X.mean(axis=0)
            y_mean = float(y.mean())
            Xw, yw = X - x_mean, y - y_mean
        else:
            x_mean, y_mean = None, 0.0
            Xw, yw = X, y

    notes = []
    if _standardize_off(cs, spec.standardize, notes):
        scale = np.sqrt(np.mean(Xw ** 2, axis=0))
        scale[~(scale > 0)] = 1.0
        if column:
            scale[0] = 1.0
        cs_w = cs.rescaled(scale)
    else:
        scale = np.ones(data.p)
        cs_w = cs
    Z = Xw / scale
    H = 2.0 * Z.T @ Z
    f = -2.0 * Z.T @ yw
    model = QuadraticModel(H, f, float(yw @ yw), w_full / scale, penalized, cs_w)
    if cs.nonlinear:
        # N(OLS, (Z'Z)^-1) in working coordinates
        model.mc_mean, model.mc_cov = _moments(H, f, 2.0)

    def unpack(full):
        if column:
            return full[1:], float(full[0])
        if x_mean is not None:
            return full, float(y_mean - x_mean @ full)
        return full, 0.0

    def objective(beta, intercept):
        Xb = X[:, 1:] @ beta if column else X @ beta
        r = y - Xb - intercept
        return float(r @ r)

    return _Working(model, scale, column, cs, weights, unpack, objective, notes)


def prepare_quadratic(H, f, const, cs: ConstraintSet, spec: FitSpec, *, intercept_first=False,
                      objective=None, mc_mean=None, mc_cov=None) -> _Working:
    """Working problem for an arbitrary convex quadratic in the full coefficient vector.

    With ``intercept_first`` the first coordinate is an intercept: it is kept
    out of the budget and of sparsification.  No standardization is applied.
    """
    H = np.asarray(H, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    P = H.shape[0]
    p_user = P - (1 if intercept_first else 0)
    if cs.p != P:
        raise DataError(f"constraints have dimension {cs.p}, model has {P} coordinates")
    weights = _resolve_weights(spec.weights, p_user)
    penalized = np.ones(P, dtype=bool)
    w_full = weights
    if intercept_first:
        penalized[0] = False
        w_full = np.concatenate([[0.0], weights])
    notes = []
    _standardize_off(cs, spec.standardize, notes)
    model = QuadraticModel(H, f, float(const), w_full, penalized, cs, mc_mean, mc_cov)

    def unpack(full):
        if intercept_first:
            return full[1:], float(full[0])
        return full, 0.0

    if objective is None:
        def objective(beta, icpt):
            full = np.concatenate([[icpt], beta]) if intercept_first else beta
            return float(0.5 * full @ H @ full + f @ full + const)

    return _Working(model, np.ones(P), intercept_first, cs, weights, unpack, objective, notes)


# ---------------------------------------------------------------------------
# split-variable QP


def _split_qp(model: QuadraticModel, free, s, cs=None, extra_rows=None, extra_rhs=None,
              abs_cost=None, lin_cost=None, hard=True):
    """QP over ``(t_plus, t_minus)`` restricted to the ``free`` coordinates.

    Inequality rows are ordered ``[cs.A; extra rows; budget]``; the index of
    the budget row is returned alongside the problem.
    """
    cs = model.cs if cs is None else cs
    idx = np.flatnonzero(free)
    H = model.H[np.ix_(idx, idx)]
    f = model.f[idx]
    if lin_cost is not None:
        f = f + lin_cost[idx]
    k = idx.size
    Q = np.block([[H, -H], [-H, H]])
    c = np.concatenate([f, -f])
    if abs_cost is not None:
        c = c + np.concatenate([abs_cost[idx], abs_cost[idx]])
    rows, rhs = [], []
    if hard:
        rows.append(np.hstack([cs.A[:, idx], -cs.A[:, idx]]))
        rhs.append(cs.a)
        if extra_rows is not None:
            rows.append(np.hstack([extra_rows[:, idx], -extra_rows[:, idx]]))
            rhs.append(extra_rhs)
    budget_row = None
    if math.isfinite(s):
        budget_row = sum(r.shape[0] for r in rows)
        v = model.budget_weights[idx]
        rows.append(np.concatenate([v, v])[None, :])
        rhs.append(np.array([s]))
    A = np.vstack(rows) if rows else np.zeros((0, 2 * k))
    b = np.concatenate(rhs) if rhs else np.zeros(0)
    if hard and cs.n_eq:
        E, e = np.hstack([cs.E[:, idx], -cs.E[:, idx]]), cs.e
    else:
        E, e = None, None
    return QpProblem(Q, c, A, b, E, e, lower_bounds=np.zeros(2 * k)), idx, budget_row


def _run_qp(problem, idx, P, spec):
    opts = QpOptions(kkt_tol=spec.kkt_tol, feasibility_tol=spec.feasibility_tol, backend=spec.backend)
    sol = solve_qp(problem, opts=opts)
    if sol.status is QpStatus.INFEASIBLE:
        raise InfeasibleConstraints("the prior constraints and the L1 budget have no common point")
    if sol.status is not QpStatus.OPTIMAL:
        reason = sol.diagnostics.get("reason", "active-set iteration limit")
        raise QpFailure(f"QP solver stopped with status {sol.status.value}: {reason}")
    k = idx.size
    theta = np.zeros(P)
    theta[idx] = sol.x[:k] - sol.x[k:]
    return theta, sol


def _nl_violation(cs, theta):
    return max((con.value(theta) for con in cs.nonlinear), default=0.0)


def _anchor(model, spec, s, free):
    """Feasible point for restoring a stalled linearization, or ``(None, None)``."""
    cs = model.cs
    if free.all() and model.mc_mean is not None:
        cfg = McConfig(model.mc_mean, model.mc_cov, m=spec.mc_draws, seed=spec.mc_seed)
        point = mc_initial_point(cfg, s, cs, model.budget_weights, tol=0.0)
        if point is not None:
            return point, "monte_carlo"
    # fall back to a polyhedral subset of the nonlinear region
    E = [cs.E] + [con.inner_equalities(cs.p)[0] for con in cs.nonlinear]
    e = [cs.e] + [con.inner_equalities(cs.p)[1] for con in cs.nonlinear]
    inner = ConstraintSet(cs.p, cs.A, cs.a, np.vstack(E), np.concatenate(e))
    try:
        problem, idx, _ = _split_qp(model, free, s, cs=inner)
        theta, _ = _run_qp(problem, idx, model.P, spec)
    except (InfeasibleConstraints, QpFailure):
        return None, None
    return theta, "inner_polyhedron"


def _restore(cs, theta, anchor):
    """Smallest move from ``theta`` toward ``anchor`` that satisfies the nonlinear rows."""
    if _nl_violation(cs, anchor) > 0.0:
        return None
    lo, hi = 0.0, 1.0
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if _nl_violation(cs, theta + mid * (anchor - theta)) <= 0.0:
            hi = mid
        else:
            lo = mid
    return theta + hi * (anchor - theta)


def _solve_hard(model, spec, free, s, abs_cost=None):
    """QP with hard constraints; nonlinear rows handled by accumulating outer cuts."""
    P, cs = model.P, model.cs
    info = {"qp_iterations": 0, "linearization_rounds": 0, "status": "optimal"}
    if not cs.nonlinear:
        problem, idx, brow = _split_qp(model, free, s, abs_cost=abs_cost)
        theta, sol = _run_qp(problem, idx, P, spec)
        info["qp_iterations"] = sol.iterations
        return theta, sol, brow, info

    anchor, source = _anchor(model, spec, s, free)
    info["anchor"] = source
    if anchor is not None:
        start = anchor
    else:
        problem, idx, _ = _split_qp(model, free, math.inf, cs=cs.linear_only())
        start, _ = _run_qp(problem, idx, P, spec)
    cut_rows, cut_rhs = outer_cuts(cs, start)
    # row of each constraint's most recent cut within cut_rows
    latest = list(range(len(cs.nonlinear)))
    curvature = None
    prev = None
    for rnd in range(spec.sl_max_rounds):
        local = model if curvature is None else replace(model, H=model.H + curvature)
        problem, idx, brow = _split_qp(local, free, s, extra_rows=cut_rows, extra_rhs=cut_rhs,
                                       abs_cost=abs_cost)
        theta, sol = _run_qp(problem, idx, P, spec)
        info["qp_iterations"] += sol.iterations
        info["linearization_rounds"] = rnd + 1
        step = math.inf if prev is None else float(np.max(np.abs(theta - prev)))
        feasible = _nl_violation(cs, theta) <= spec.feasibility_tol
        # without curvature the cuts form an outer approximation, so a feasible point is optimal
        if feasible and (curvature is None or step <= _SQP_STEP_TOL * (1.0 + np.max(np.abs(theta)))):
            break
        if step < spec.sl_tol:
            break
        # SQP: add the curvature of the convex representation weighted by its cut multiplier
        mu = sol.ineq_multipliers[cs.n_ineq + np.array(latest)]
        curvature = sum(max(float(m), 0.0) * con.cut_hessian(theta) for m, con in zip(mu, cs.nonlinear))
        new_rows, new_rhs = outer_cuts(cs, theta)
        latest = [cut_rows.shape[0] + i for i in range(len(cs.nonlinear))]
        cut_rows = np.vstack([cut_rows, new_rows])
        cut_rhs = np.concatenate([cut_rhs, new_rhs])
        prev = theta
    viol = _nl_violation(cs, theta)
    if viol > spec.feasibility_tol:
        restored = _restore(cs, theta, anchor) if anchor is not None else None
        if restored is None:
            raise LinearizationStalled(
                f"sequential linearization ended {viol:.3g} outside the nonlinear constraints "
                f"after {info['linearization_rounds']} rounds")
        theta = restored
        info["status"] = "restored"
    return theta, sol, brow, info


def _solve_lagrangian(model, spec, free, lam2, abs_cost):
    """Every constraint moved into the objective with the fixed multipliers ``lam2``."""
    cs = model.cs
    n_a, n_e = cs.n_ineq, cs.n_eq
    lam_e = lam2[n_a:n_a + n_e] - lam2[n_a + n_e:n_a + 2 * n_e]
    lam_nl = lam2[n_a + 2 * n_e:]
    base = cs.A.T @ lam2[:n_a] + cs.E.T @ lam_e
    info = {"qp_iterations": 0, "linearization_rounds": 0, "status": "optimal"}
    theta = np.zeros(model.P)
    sol = None
    rounds = spec.sl_max_rounds if cs.nonlinear else 1
    converged = not cs.nonlinear
    for rnd in range(rounds):
        lin = base.copy()
        for lam, con in zip(lam_nl, cs.nonlinear):
            lin += lam * con.gradient(theta)
        problem, idx, _ = _split_qp(model, free, math.inf, abs_cost=abs_cost, lin_cost=lin, hard=False)
        new, sol = _run_qp(problem, idx, model.P, spec)
        info["qp_iterations"] += sol.iterations
        info["linearization_rounds"] = rnd + 1
        step = np.max(np.abs(new - theta))
        theta = new
        if step < spec.sl_tol:
            converged = True
            break
    if not converged:
        raise LinearizationStalled("penalized linearization did not reach a fixed point")
    return theta, sol, None, info


def _solve(work: _Working, spec: FitSpec, s, abs_cost=None, lam2=None):
    """Fit, then zero small coefficients and re-solve on the remaining support."""
    model = work.model
    free = np.ones(model.P, dtype=bool)

    def once(mask):
        if lam2 is not None:
            return _solve_lagrangian(model, spec, mask, lam2, abs_cost)
        return _solve_hard(model, spec, mask, s, abs_cost)

    theta, sol, brow, info = once(free)
    rounds = 0
    for _ in range(_MAX_SPARSIFY_ROUNDS):
        small = model.penalized & free & (np.abs(theta / work.scale) <= spec.sparsity_tol)
        small &= theta != 0.0
        if not small.any():
            break
        trial = free & ~small
        try:
            theta2, sol2, brow2, info2 = once(trial)
        except (InfeasibleConstraints, QpFailure, LinearizationStalled):
            break
        rounds += 1
        free, theta, sol, brow = trial, theta2, sol2, brow2
        info["qp_iterations"] += info2["qp_iterations"]
        info["linearization_rounds"] += info2["linearization_rounds"]
        if info2["status"] != "optimal":
            info["status"] = info2["status"]
    info["sparsify_rounds"] = rounds
    return np.where(free, theta, 0.0), sol, brow, info


def _finish(work: _Working, spec: FitSpec, theta, sol, brow, info) -> FitResult:
    full = theta / work.scale
    pen = work.model.penalized
    trimmed = np.where(pen & (np.abs(full) <= spec.sparsity_tol), 0.0, full)
    if work.cs.n_rows == 0 or np.max(evaluate(work.cs, trimmed)) <= spec.feasibility_tol:
        full = trimmed
    full = full + 0.0  # no negative zeros
    beta, intercept = work.unpack(full)
    zero_set = tuple(int(j) for j in np.flatnonzero(beta == 0.0))
    vals = evaluate(work.cs, full)
    active = tuple(int(i) for i in np.flatnonzero(np.abs(vals) <= spec.feasibility_tol))

    solver = dict(info)
    cs = work.cs
    solver["jitter"] = sol.jitter
    solver["backend"] = sol.diagnostics.get("backend")
    solver["budget_multiplier"] = float(sol.ineq_multipliers[brow]) if brow is not None else 0.0
    if cs.n_ineq and sol.ineq_multipliers.size >= cs.n_ineq and info.get("hard", True):
        mu_a = sol.ineq_multipliers[:cs.n_ineq]
    else:
        mu_a = np.zeros(cs.n_ineq)
    nu = sol.eq_multipliers[:cs.n_eq] if sol.eq_multipliers.size >= cs.n_eq else np.zeros(cs.n_eq)
    solver["constraint_multipliers"] = [float(v) for v in np.concatenate(
        [mu_a, np.maximum(nu, 0.0), np.maximum(-nu, 0.0), np.zeros(len(cs.nonlinear))])]
    if work.notes:
        solver["warnings"] = list(work.notes)
    return FitResult(
        beta=beta,
        intercept=intercept,
        l1_norm=float(np.sum(work.weights * np.abs(beta))),
        objective=work.objective(beta, intercept),
        active_constraints=active,
        zero_set=zero_set,
        solver_info=solver,
        constraint_point=full,
    )


def solve_working(work: _Working, spec: FitSpec) -> FitResult:
    """Budget fit of a prepared working problem."""
    theta, sol, brow, info = _solve(work, spec, spec.s)
    return _finish(work, spec, theta, sol, brow, info)


def fit_constrained(data: Dataset, cs: ConstraintSet | None = None, spec: FitSpec | None = None) -> FitResult:
    """Least squares under the L1 budget ``spec.s`` and the prior constraints.

    Parameters
    ----------
    data : Dataset
    cs : ConstraintSet, optional
        Dimension ``p``, or ``p + 1`` to constrain the intercept as coordinate 1.
    spec : FitSpec, optional

    Returns
    -------
    FitResult

    Raises
    ------
    InfeasibleConstraints
        The prior region does not meet the L1 ball.
    LinearizationStalled
        Nonlinear constraints could not be satisfied within the round cap.
    QpFailure
        The underlying QP did not reach optimality.
    """
    spec = spec or FitSpec()
    return solve_working(prepare_gaussian(data, cs, spec), spec)


def fit_penalized(data: Dataset, cs: ConstraintSet | None = None, lambda1=0.0, lambda2=None,
                  spec: FitSpec | None = None) -> FitResult:
    """Minimize ``RSS + sum_j lambda1_j |beta_j| (+ lambda2' g(beta))``.

    ``lambda1`` is a scalar or one weight per coefficient.  With ``lambda2``
    None the prior constraints stay hard.  Otherwise ``lambda2`` holds one
    nonnegative multiplier per entry of :func:`~priorlasso.constraints.evaluate`
    and the constraints are replaced by that penalty, with nonlinear rows
    linearized at the current iterate until the iterates settle.
    ``spec.s`` is ignored; ``spec.weights`` only affects the reported ``l1_norm``.
    """
    spec = spec or FitSpec()
    work = prepare_gaussian(data, cs, spec)
    p_user = work.weights.size
    lam1 = np.broadcast_to(np.asarray(lambda1, dtype=np.float64), (p_user,)).copy()
    if np.any(~np.isfinite(lam1)) or np.any(lam1 < 0):
        raise ValueError("lambda1 must be finite and nonnegative")
    if work.column_intercept:
        lam1 = np.concatenate([[0.0], lam1])
    abs_cost = lam1 / work.scale
    lam2 = None
    if lambda2 is not None:
        lam2 = np.asarray(lambda2, dtype=np.float64).reshape(-1)
        if lam2.size != work.cs.n_rows:
            raise ValueError(f"lambda2 needs {work.cs.n_rows} entries, got {lam2.size}")
        if np.any(~np.isfinite(lam2)) or np.any(lam2 < 0):
            raise ValueError("lambda2 must be finite and nonnegative")
    theta, sol, brow, info = _solve(work, spec, math.inf, abs_cost=abs_cost, lam2=lam2)
    if lam2 is not None:
        info["hard"] = False
    return _finish(work, spec, theta, sol, brow, info)


def least_squares_reference(data: Dataset, cs: ConstraintSet | None = None, spec: FitSpec | None = None):
    """Least squares under the linear prior rows only (no budget)."""
    spec = replace(spec or FitSpec(), s=math.inf)
    if cs is not None:
        cs = cs.linear_only()
    return fit_constrained(data, cs, spec)
