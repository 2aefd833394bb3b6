"""Dense convex quadratic programming by a primal active-set method.

Problems have the form::

    minimize    1/2 x'Qx + c'x
    subject to  A_ineq x <= b_ineq,  A_eq x = b_eq,  x >= lower_bounds

with ``Q`` symmetric positive semidefinite.  The inner iteration lives in a
compiled kernel when the extension is built and in numpy otherwise; set
``PRIORLASSO_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field

import numpy as np

from . import _active_set_py

KERNELS = {"python": _active_set_py.active_set_kernel}
try:
    from . import _active_set_ext
except ImportError:  # pragma: no cover - depends on the build
    _active_set_ext = None
else:
    KERNELS["cython"] = _active_set_ext.active_set_kernel

if os.environ.get("PRIORLASSO_PURE_PYTHON") == "1" or "cython" not in KERNELS:
    DEFAULT_BACKEND = "python"
else:
    DEFAULT_BACKEND = "cython"

_STEP_TOL = 1e-12
_INDEPENDENCE_TOL = 1e-9
_PHASE_ONE_CURVATURE = 1e-8


class QpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    ITERATION_LIMIT = "IterationLimit"


def _frozen(arr):
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class QpProblem:
    """Immutable QP data.  ``Q`` is symmetrized on construction."""

    Q: np.ndarray
    c: np.ndarray
    A_ineq: np.ndarray | None = None
    b_ineq: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    lower_bounds: np.ndarray | None = None

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError(f"Q must be square, got shape {Q.shape}")
        d = Q.shape[0]
        c = np.asarray(self.c, dtype=np.float64).reshape(-1)
        if c.shape != (d,):
            raise ValueError(f"c has length {c.size}, expected {d}")

        def pair(M, v, name):
            if M is None:
                if v is not None and np.size(v):
                    raise ValueError(f"{name} right-hand side given without a matrix")
                return np.zeros((0, d)), np.zeros(0)
            M = np.asarray(M, dtype=np.float64)
            if M.ndim == 1:
                M = M.reshape(1, -1)
            if M.shape[1] != d:
                raise ValueError(f"{name} has {M.shape[1]} columns, expected {d}")
            v = np.asarray(v, dtype=np.float64).reshape(-1)
            if v.shape != (M.shape[0],):
                raise ValueError(f"{name} right-hand side has length {v.size}, expected {M.shape[0]}")
            return M, v

        A, b = pair(self.A_ineq, self.b_ineq, "A_ineq")
        E, e = pair(self.A_eq, self.b_eq, "A_eq")
        for name, arr in (("Q", Q), ("c", c), ("A_ineq", A), ("b_ineq", b), ("A_eq", E), ("b_eq", e)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        lb = self.lower_bounds
        if lb is not None:
            lb = np.asarray(lb, dtype=np.float64).reshape(-1)
            if lb.shape != (d,):
                raise ValueError(f"lower_bounds has length {lb.size}, expected {d}")
            if np.any(np.isnan(lb)) or np.any(lb == np.inf):
                raise ValueError("lower_bounds must be finite or -inf")
            lb = _frozen(lb)
        object.__setattr__(self, "Q", _frozen(0.5 * (Q + Q.T)))
        object.__setattr__(self, "c", _frozen(c))
        object.__setattr__(self, "A_ineq", _frozen(A))
        object.__setattr__(self, "b_ineq", _frozen(b))
        object.__setattr__(self, "A_eq", _frozen(E))
        object.__setattr__(self, "b_eq", _frozen(e))
        object.__setattr__(self, "lower_bounds", lb)

    @property
    def d(self):
        return self.Q.shape[0]

    def inequality_system(self):
        """Stack ``A_ineq`` with one row ``-x_i <= -l_i`` per finite lower bound.

        Row indices of the stacked system are the ones used by
        ``QpSolution.active_set`` and ``ineq_multipliers``.
        """
        if self.lower_bounds is None:
            return self.A_ineq, self.b_ineq
        coords = np.flatnonzero(np.isfinite(self.lower_bounds))
        rows = np.zeros((coords.size, self.d))
        rows[np.arange(coords.size), coords] = -1.0
        return (np.vstack([self.A_ineq, rows]),
                np.concatenate([self.b_ineq, -self.lower_bounds[coords]]))

    def objective(self, x):
        x = np.asarray(x, dtype=np.float64)
        return float(0.5 * x @ self.Q @ x + self.c @ x)


@dataclass(frozen=True)
class QpOptions:
    kkt_tol: float = 1e-8
    feasibility_tol: float = 1e-9
    max_iter: int | None = None
    backend: str | None = None


@dataclass(frozen=True, eq=False)
class QpSolution:
    x: np.ndarray
    objective: float
    active_set: tuple
    iterations: int
    status: QpStatus
    ineq_multipliers: np.ndarray
    eq_multipliers: np.ndarray
    jitter: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def optimal(self):
        return self.status is QpStatus.OPTIMAL


def kkt_residuals(problem: QpProblem, solution: QpSolution) -> dict:
    """Max-norm residuals of the four KKT blocks at ``solution.x``.

    Uses the multipliers stored on the solution; stationarity is
    ``Qx + c + A'mu + E'nu`` over the stacked inequality system.
    """
    A, b = problem.inequality_system()
    E, e = problem.A_eq, problem.b_eq
    x = np.asarray(solution.x, dtype=np.float64)
    mu = np.asarray(solution.ineq_multipliers, dtype=np.float64)
    nu = np.asarray(solution.eq_multipliers, dtype=np.float64)
    grad = problem.Q @ x + problem.c + A.T @ mu + E.T @ nu
    slack = A @ x - b
    primal = max(np.max(slack, initial=0.0), np.max(np.abs(E @ x - e), initial=0.0), 0.0)
    return {
        "stationarity": float(np.max(np.abs(grad), initial=0.0)),
        "primal": float(primal),
        "dual": float(max(0.0, -np.min(mu, initial=0.0))),
        "complementarity": float(np.max(np.abs(mu * slack), initial=0.0)),
    }


def _orthonormal_basis(rows):
    if rows.shape[0] == 0:
        return np.zeros((rows.shape[1], 0))
    U, s, _ = np.linalg.svd(rows.T, full_matrices=False)
    rank = int(np.sum(s > _INDEPENDENCE_TOL * max(s[0], 1e-300)))
    return U[:, :rank]


def _extend_if_independent(basis, row):
    norm = np.linalg.norm(row)
    if norm == 0.0:
        return basis, False
    r = row - basis @ (basis.T @ row)
    r = r - basis @ (basis.T @ r)
    rn = np.linalg.norm(r)
    if rn <= _INDEPENDENCE_TOL * norm:
        return basis, False
    return np.column_stack([basis, r / rn]), True


def _independent_equalities(E, e, tol):
    """Drop linearly dependent equality rows; report inconsistency."""
    d = E.shape[1]
    basis = np.zeros((d, 0))
    keep = []
    for i in range(E.shape[0]):
        basis, added = _extend_if_independent(basis, E[i])
        if added:
            keep.append(i)
    keep = np.array(keep, dtype=int)
    Ek, ek = E[keep], e[keep]
    if keep.size < E.shape[0]:
        x = np.linalg.lstsq(Ek, ek, rcond=None)[0] if keep.size else np.zeros(d)
        if np.max(np.abs(E @ x - e)) > tol * max(1.0, np.max(np.abs(e))):
            return Ek, ek, keep, False
    return Ek, ek, keep, True


def _initial_working_set(A, b, E, x, tol):
    d = A.shape[1]
    working = np.zeros(A.shape[0], dtype=np.int8)
    basis = _orthonormal_basis(E)
    if A.shape[0] == 0:
        return working
    slack = b - A @ x
    for i in np.flatnonzero(slack <= tol):
        if basis.shape[1] >= d:
            break
        basis, added = _extend_if_independent(basis, A[i])
        if added:
            working[i] = 1
    return working


def _phase_one(kernel, A, b, E, e, x_start, opts, max_iter):
    """Find a feasible point by minimizing the max violation ``t``.

    Solves ``min t + eps/2 (|x|^2 + t^2)`` s.t. ``A x - t <= b``, ``t >= 0``,
    ``E x = e``; the small curvature keeps the subproblem strictly convex.
    Returns ``(x, iterations)`` with ``x`` None when no feasible point exists.
    """
    d, m = A.shape[1], A.shape[0]
    tol = opts.feasibility_tol
    t0 = max(0.0, float(np.max(A @ x_start - b, initial=0.0)))
    if t0 <= tol:
        return x_start, 0
    A1 = np.zeros((m + 1, d + 1))
    A1[:m, :d] = A
    A1[:m, d] = -1.0
    A1[m, d] = -1.0
    b1 = np.concatenate([b, [0.0]])
    E1 = np.hstack([E, np.zeros((E.shape[0], 1))])
    z0 = np.concatenate([x_start, [t0]])
    iters = 0
    for eps in (_PHASE_ONE_CURVATURE, _PHASE_ONE_CURVATURE * 1e-4):
        G1 = np.eye(d + 1) * eps
        c1 = np.zeros(d + 1)
        c1[d] = 1.0
        working = _initial_working_set(A1, b1, E1, z0, tol)
        z, _, _, _, it, status = kernel(
            np.ascontiguousarray(G1), c1, np.ascontiguousarray(A1), b1,
            np.ascontiguousarray(E1), e, z0, working, max_iter, _STEP_TOL, opts.kkt_tol)
        iters += int(it)
        x = np.asarray(z[:d])
        if status == _active_set_py.OPTIMAL and np.max(A @ x - b, initial=0.0) <= tol:
            return x, iters
    return None, iters


def _infeasible(problem, x, iters, reason, m, q):
    return QpSolution(
        x=np.asarray(x, dtype=np.float64),
        objective=float("nan"),
        active_set=(),
        iterations=int(iters),
        status=QpStatus.INFEASIBLE,
        ineq_multipliers=np.zeros(m),
        eq_multipliers=np.zeros(q),
        diagnostics={"reason": reason},
    )


def solve_qp(problem: QpProblem, x0=None, opts: QpOptions | None = None) -> QpSolution:
    """Solve ``problem`` by the primal active-set method.

    Parameters
    ----------
    problem : QpProblem
    x0 : array_like, optional
        Feasible starting point.  When omitted a phase-1 subproblem finds one.
    opts : QpOptions, optional

    Returns
    -------
    QpSolution
        ``status`` is ``Optimal``, ``Infeasible`` (phase 1 found no feasible
        point) or ``IterationLimit``.  A semidefinite ``Q`` is factorized with
        a ridge of ``1e-10 * trace(Q) / d``; the reported objective and
        residuals always use the unmodified ``Q``.
    """
    opts = opts or QpOptions()
    backend = opts.backend or DEFAULT_BACKEND
    try:
        kernel = KERNELS[backend]
    except KeyError:
        raise ValueError(f"unknown QP backend {backend!r}; available: {sorted(KERNELS)}") from None

    Q, c = problem.Q, problem.c
    A, b = problem.inequality_system()
    A = np.ascontiguousarray(A)
    d, m = problem.d, A.shape[0]
    q = problem.A_eq.shape[0]
    tol = opts.feasibility_tol
    max_iter = opts.max_iter if opts.max_iter is not None else 50 * (d + m)

    E, e, eq_keep, consistent = _independent_equalities(problem.A_eq, problem.b_eq, tol)
    E = np.ascontiguousarray(E)
    if not consistent:
        return _infeasible(problem, np.zeros(d), 0, "inconsistent equality constraints", m, q)

    if d == 0:
        if np.min(b, initial=0.0) < -tol:
            return _infeasible(problem, np.zeros(0), 0, "constant rows violated", m, q)
        empty = {"x": np.zeros(0), "working": np.zeros(m, dtype=bool), "iterations": 0,
                 "status": _active_set_py.OPTIMAL, "jitter": 0.0, "retries": 0}
        return _assemble(problem, empty, A, b, E, e, eq_keep, opts, 0, {"backend": backend})

    if x0 is not None:
        x_start = np.asarray(x0, dtype=np.float64).reshape(-1)
        if x_start.shape != (d,):
            raise ValueError(f"x0 has length {x_start.size}, expected {d}")
        viol = max(np.max(A @ x_start - b, initial=0.0),
                   np.max(np.abs(problem.A_eq @ x_start - problem.b_eq), initial=0.0))
        if viol > tol:
            raise ValueError(f"x0 violates the constraints by {viol:.3g}")
        phase_one_iters = 0
    else:
        if E.shape[0]:
            x_start = np.linalg.lstsq(E, e, rcond=None)[0]
        else:
            x_start = np.zeros(d)
        x_start, phase_one_iters = _phase_one(kernel, A, b, E, e, x_start, opts, 50 * (d + m + 2))
        if x_start is None:
            return _infeasible(problem, np.zeros(d), phase_one_iters, "phase 1 found no feasible point", m, q)

    diagnostics = {"backend": backend, "phase_one_iterations": int(phase_one_iters)}
    run = _active_set_run(kernel, Q, c, A, b, E, e, x_start, opts, max_iter)
    if run["status"] == _active_set_py.OPTIMAL:
        solution = _assemble(problem, run, A, b, E, e, eq_keep, opts, phase_one_iters, diagnostics)
        if _clean(problem, solution, opts):
            return solution
    # Degenerate vertex: relax each row by a distinct tiny amount, then re-solve the
    # final working set against the original right-hand side.
    b_relaxed = b + _relaxation(b)
    retry = _active_set_run(kernel, Q, c, A, b_relaxed, E, e, x_start, opts, max_iter)
    if retry["status"] == _active_set_py.OPTIMAL:
        diagnostics["relaxed"] = True
        retry["iterations"] += run["iterations"]
        candidate = _assemble(problem, retry, A, b, E, e, eq_keep, opts, phase_one_iters, diagnostics,
                              force_polish=True)
        if candidate.diagnostics["kkt"]["primal"] <= opts.feasibility_tol:
            return candidate
    if run["status"] == _active_set_py.OPTIMAL:
        return solution
    reason = "singular KKT system" if run["status"] == _active_set_py.SINGULAR else "iteration limit"
    x = run["x"]
    return QpSolution(x=x, objective=problem.objective(x), active_set=(),
                      iterations=run["iterations"] + int(phase_one_iters),
                      status=QpStatus.ITERATION_LIMIT, ineq_multipliers=np.zeros(m),
                      eq_multipliers=np.zeros(q), jitter=run["jitter"],
                      diagnostics={**diagnostics, "reason": reason,
                                   "singular_retries": run["retries"]})


def _relaxation(b):
    # distinct per-row offsets in [1, 2) * 1e-10 * scale (golden-ratio sequence)
    i = np.arange(b.size)
    return 1e-10 * max(1.0, float(np.max(np.abs(b), initial=0.0))) * (1.0 + np.mod(i * 0.6180339887498949, 1.0))


def _active_set_run(kernel, Q, c, A, b, E, e, x_start, opts, max_iter):
    d = Q.shape[0]
    scale = float(np.trace(Q)) / d if d else 1.0
    if scale <= 0.0:
        scale = 1.0
    try:
        np.linalg.cholesky(Q)
        jitter = 0.0
    except np.linalg.LinAlgError:
        jitter = 1e-10 * scale
    working0 = _initial_working_set(A, b, E, x_start, opts.feasibility_tol)
    retries = 0
    while True:
        G = np.ascontiguousarray(Q + jitter * np.eye(d))
        x, _, _, working, iters, status = kernel(
            G, c, A, b, E, e, x_start, working0, max_iter, _STEP_TOL, opts.kkt_tol)
        if status != _active_set_py.SINGULAR or retries >= 3:
            break
        jitter = max(jitter, 1e-10 * scale) * 1e4
        retries += 1
    return {"x": np.asarray(x, dtype=np.float64), "working": np.asarray(working, dtype=bool),
            "iterations": int(iters), "status": status, "jitter": jitter, "retries": retries}


def _assemble(problem, run, A, b, E, e, eq_keep, opts, phase_one_iters, diagnostics, force_polish=False):
    Q, c = problem.Q, problem.c
    m, q = A.shape[0], problem.A_eq.shape[0]
    x = run["x"]
    W = np.flatnonzero(run["working"])
    diagnostics = {**diagnostics, "singular_retries": run["retries"]}
    if run["jitter"] > 0.0 or force_polish:
        x, polished = _polish(Q, c, A, b, E, e, W, x, opts, force=force_polish)
        diagnostics["polished"] = polished
    C = np.vstack([E, A[W]])
    mult = _multipliers(Q, c, C, x)
    mu = np.zeros(m)
    mu[W] = mult[E.shape[0]:]
    nu = np.zeros(q)
    nu[eq_keep] = mult[:E.shape[0]]
    solution = QpSolution(
        x=x,
        objective=problem.objective(x),
        active_set=tuple(int(i) for i in W),
        iterations=run["iterations"] + int(phase_one_iters),
        status=QpStatus.OPTIMAL,
        ineq_multipliers=mu,
        eq_multipliers=nu,
        jitter=run["jitter"],
        diagnostics=diagnostics,
    )
    diagnostics["kkt"] = kkt_residuals(problem, solution)
    return solution


def _clean(problem, solution, opts):
    """KKT residuals small relative to the problem data."""
    r = solution.diagnostics["kkt"]
    size = max(1.0, float(np.max(np.abs(problem.Q), initial=0.0)), float(np.max(np.abs(problem.c), initial=0.0)))
    return (r["primal"] <= opts.feasibility_tol and r["dual"] <= opts.kkt_tol
            and r["stationarity"] <= opts.kkt_tol * size and r["complementarity"] <= opts.kkt_tol * size)


def _multipliers(Q, c, C, x):
    if C.shape[0] == 0:
        return np.zeros(0)
    return np.linalg.lstsq(C.T, -(Q @ x + c), rcond=None)[0]


def _polish(Q, c, A, b, E, e, W, x, opts, force=False):
    """Re-solve the final equality-constrained subproblem with the true ``Q``.

    Unless ``force`` is set the polished point is kept only when it does
    not worsen stationarity.
    """
    d = Q.shape[0]
    C = np.vstack([E, A[W]])
    k = C.shape[0]
    K = np.zeros((d + k, d + k))
    K[:d, :d] = Q
    K[:d, d:] = C.T
    K[d:, :d] = C
    rhs = np.concatenate([-c, e, b[W]])
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    xp = sol[:d]
    if not np.all(np.isfinite(xp)):
        return x, False
    tol = opts.feasibility_tol
    if np.max(A @ xp - b, initial=0.0) > tol or np.max(np.abs(E @ xp - e), initial=0.0) > tol:
        return x, False
    mult = _multipliers(Q, c, C, xp)
    if np.min(mult[E.shape[0]:], initial=0.0) < -opts.kkt_tol:
        return x, False

    def stationarity(z):
        g = Q @ z + c
        if k:
            g = g + C.T @ _multipliers(Q, c, C, z)
        return np.max(np.abs(g), initial=0.0)

    if not force and stationarity(xp) > stationarity(x):
        return x, False
    return xp, True
