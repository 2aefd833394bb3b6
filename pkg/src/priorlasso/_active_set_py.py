"""Pure numpy active-set iteration (fallback for the compiled kernel).

Both backends implement the same loop and must stay in lockstep:

    minimize    1/2 x'Gx + c'x
    subject to  A x <= b,  E x = e

starting from a feasible ``x0`` with an initial working set.  Status codes:
0 optimal, 1 iteration limit, 2 singular KKT matrix.
"""

import numpy as np

OPTIMAL = 0
ITERATION_LIMIT = 1
SINGULAR = 2

# relative threshold below which a constraint is considered parallel to the step
_PARALLEL_TOL = 1e-12


def active_set_kernel(G, c, A, b, E, e, x0, working0, max_iter, step_tol, dual_tol):
    d = G.shape[0]
    m = A.shape[0]
    q = E.shape[0]
    x = np.array(x0, dtype=np.float64, copy=True)
    working = np.array(working0, dtype=np.int8, copy=True)
    lam = np.zeros(m)
    nu = np.zeros(q)
    at_minimizer = False
    # the row just dropped has A p < 0 in exact arithmetic; rounding must not re-add it
    dropped = -1
    # after a zero-length step use the lowest-index negative multiplier (Bland) to avoid cycling
    degenerate = False

    for it in range(max_iter):
        W = np.flatnonzero(working)
        k = q + W.size
        n = d + k
        K = np.zeros((n, n))
        K[:d, :d] = G
        if q:
            K[:d, d:d + q] = E.T
            K[d:d + q, :d] = E
        if W.size:
            AW = A[W]
            K[:d, d + q:] = AW.T
            K[d + q:, :d] = AW
        rhs = np.zeros(n)
        rhs[:d] = -(G @ x + c)
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            return x, lam, nu, working, it, SINGULAR
        p = sol[:d]
        mult = sol[d:]

        if at_minimizer or np.max(np.abs(p), initial=0.0) <= step_tol * (1.0 + np.max(np.abs(x), initial=0.0)):
            at_minimizer = False
            lam_w = mult[q:]
            if W.size == 0 or lam_w.min() >= -dual_tol:
                lam[:] = 0.0
                lam[W] = lam_w
                nu[:] = mult[:q]
                return x, lam, nu, working, it + 1, OPTIMAL
            if degenerate:
                dropped = int(W[np.flatnonzero(lam_w < -dual_tol)[0]])
            else:
                dropped = int(W[np.argmin(lam_w)])
            working[dropped] = 0
            continue

        Ap = A @ p
        thresh = _PARALLEL_TOL * np.abs(A).sum(axis=1) * np.max(np.abs(p))
        eligible = (working == 0) & (Ap > thresh)
        if dropped >= 0:
            eligible[dropped] = False
            dropped = -1
        cand = np.flatnonzero(eligible)
        alpha = 1.0
        block = -1
        if cand.size:
            slack = np.maximum(b[cand] - A[cand] @ x, 0.0)
            ratios = slack / Ap[cand]
            j = int(np.argmin(ratios))
            if ratios[j] < alpha:
                alpha = float(ratios[j])
                block = int(cand[j])
        degenerate = alpha == 0.0
        x = x + alpha * p
        if block >= 0:
            working[block] = 1
        else:
            at_minimizer = True

    return x, lam, nu, working, max_iter, ITERATION_LIMIT
