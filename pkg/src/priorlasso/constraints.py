"""Prior constraint systems ``g(beta) <= 0``.

A :class:`ConstraintSet` holds linear inequalities ``A beta <= a``, linear
equalities ``E beta = e`` and registered smooth nonlinear kinds.  Everything is
stored in "<= 0" form; ``>=`` and ``=`` only exist in the text format.

Constraint file format (UTF-8, one constraint per line, ``#`` comments)::

    lin: c1 c2 ... cp <= rhs      # also >= and =
    nl: negdet i j k              # beta_k^2 - beta_i*beta_j <= 0, 1-based
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintSyntaxError, DataError

NONLINEAR_KINDS = {}


def register_kind(name):
    """Class decorator adding a nonlinear constraint kind to the parser."""

    def deco(cls):
        cls.kind = name
        NONLINEAR_KINDS[name] = cls
        return cls

    return deco


class NonlinearConstraint:
    """Base class for a smooth scalar constraint ``g(beta) <= 0``.

    Subclasses provide ``value``, ``gradient`` and ``convex_cut``; the last
    returns a halfspace ``(row, rhs)`` implied by the constraint together
    with any sign rows it requires, valid at every expansion point.
    """

    kind = None

    def indices(self):
        raise NotImplementedError

    def implied_rows(self, p):
        return np.zeros((0, p)), np.zeros(0)

    def value(self, beta):
        raise NotImplementedError

    def gradient(self, beta):
        raise NotImplementedError

    def values(self, B):
        """Row-wise ``value`` for a 2-D array of coefficient vectors."""
        return np.array([self.value(b) for b in B])

    def convex_cut(self, beta):
        raise NotImplementedError

    def cut_hessian(self, beta):
        """Hessian of the convex function behind ``convex_cut`` (zeros where undefined)."""
        return np.zeros((len(beta), len(beta)))

    def inner_equalities(self, p):
        """Linear equalities ``(E, e)`` whose solutions (with the sign rows) satisfy ``g <= 0``."""
        raise NotImplementedError

    def to_text(self):
        raise NotImplementedError


@register_kind("negdet")
@dataclass(frozen=True)
class NegDet2(NonlinearConstraint):
    """``beta_k^2 - beta_i beta_j <= 0`` with ``beta_i <= 0``, ``beta_j <= 0``.

    Indices are 0-based here and 1-based in files.  Together with the two
    sign rows this says the 2x2 matrix ``[[b_i, b_k], [b_k, b_j]]`` is
    negative semidefinite, which is a convex (second-order cone) region.
    """

    i: int
    j: int
    k: int

    def indices(self):
        return (self.i, self.j, self.k)

    def implied_rows(self, p):
        rows = np.zeros((2, p))
        rows[0, self.i] = 1.0
        rows[1, self.j] = 1.0
        return rows, np.zeros(2)

    def value(self, beta):
        return float(beta[self.k] ** 2 - beta[self.i] * beta[self.j])

    def values(self, B):
        return B[:, self.k] ** 2 - B[:, self.i] * B[:, self.j]

    def gradient(self, beta):
        g = np.zeros(len(beta))
        g[self.i] = -beta[self.j]
        g[self.j] = -beta[self.i]
        g[self.k] = 2.0 * beta[self.k]
        return g

    def convex_cut(self, beta):
        # Same region as sqrt(4 b_k^2 + (b_i - b_j)^2) + b_i + b_j <= 0, which is
        # convex everywhere, so its tangent halfspace never removes a feasible point.
        bi, bj, bk = beta[self.i], beta[self.j], beta[self.k]
        r = np.hypot(2.0 * bk, bi - bj)
        row = np.zeros(len(beta))
        row[self.i] = 1.0
        row[self.j] = 1.0
        if r > 0.0:
            row[self.i] += (bi - bj) / r
            row[self.j] -= (bi - bj) / r
            row[self.k] += 4.0 * bk / r
        return row, 0.0

    def cut_hessian(self, beta):
        bi, bj, bk = beta[self.i], beta[self.j], beta[self.k]
        u, w = 2.0 * bk, bi - bj
        r = np.hypot(u, w)
        out = np.zeros((len(beta), len(beta)))
        if r == 0.0:
            return out
        # r = |M b| with M mapping (b_i, b_j, b_k) to (w, u)
        M = np.array([[1.0, -1.0, 0.0], [0.0, 0.0, 2.0]])
        n = np.array([w, u]) / r
        local = M.T @ ((np.eye(2) - np.outer(n, n)) / r) @ M
        idx = [self.i, self.j, self.k]
        out[np.ix_(idx, idx)] = local
        return out

    def inner_equalities(self, p):
        # b_k = 0 with b_i, b_j <= 0 gives g = -b_i b_j <= 0
        row = np.zeros((1, p))
        row[0, self.k] = 1.0
        return row, np.zeros(1)

    def to_text(self):
        return f"nl: negdet {self.i + 1} {self.j + 1} {self.k + 1}"

    @classmethod
    def from_args(cls, args, p, line):
        if len(args) != 3:
            raise ConstraintSyntaxError(f"negdet takes 3 indices, got {len(args)}", line)
        try:
            idx = [int(a) for a in args]
        except ValueError:
            raise ConstraintSyntaxError(f"negdet indices must be integers: {' '.join(args)}", line) from None
        for v in idx:
            if not 1 <= v <= p:
                raise ConstraintSyntaxError(f"index {v} out of range [1, {p}]", line)
        if len(set(idx)) != 3:
            raise ConstraintSyntaxError("negdet indices must be distinct", line)
        return cls(idx[0] - 1, idx[1] - 1, idx[2] - 1)


def _frozen(arr, shape):
    arr = np.array(arr, dtype=np.float64).reshape(shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Immutable constraint system on ``p`` coefficients.

    ``implied`` lists the rows of ``A`` that were added automatically by a
    nonlinear kind; they are dropped when serializing.
    """

    p: int
    A: np.ndarray = None
    a: np.ndarray = None
    E: np.ndarray = None
    e: np.ndarray = None
    nonlinear: tuple = ()
    implied: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        p = int(self.p)
        if p < 1:
            raise DataError("constraint dimension must be at least 1")
        def matrix(M, name):
            if M is None:
                return np.zeros((0, p))
            M = np.asarray(M, dtype=np.float64)
            if M.size == 0:
                return np.zeros((0, p))
            if M.ndim == 1:
                M = M.reshape(1, -1)
            if M.ndim != 2 or M.shape[1] != p:
                raise DataError(f"constraint matrix {name} must have {p} columns, got shape {M.shape}")
            return M

        A = matrix(self.A, "A")
        E = matrix(self.E, "E")
        a = np.zeros(A.shape[0]) if self.a is None else np.asarray(self.a, dtype=np.float64).reshape(-1)
        e = np.zeros(E.shape[0]) if self.e is None else np.asarray(self.e, dtype=np.float64).reshape(-1)
        if a.size != A.shape[0] or e.size != E.shape[0]:
            raise DataError("constraint right-hand sides do not match the number of rows")
        for name, arr in (("A", A), ("a", a), ("E", E), ("e", e)):
            if not np.all(np.isfinite(arr)):
                raise DataError(f"constraint {name} has non-finite entries")
        for con in self.nonlinear:
            if any(not 0 <= i < p for i in con.indices()):
                raise DataError(f"{con.to_text()} refers to a coefficient outside 1..{p}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "A", _frozen(A, (A.shape[0], p)))
        object.__setattr__(self, "a", _frozen(a, (a.size,)))
        object.__setattr__(self, "E", _frozen(E, (E.shape[0], p)))
        object.__setattr__(self, "e", _frozen(e, (e.size,)))
        object.__setattr__(self, "nonlinear", tuple(self.nonlinear))
        object.__setattr__(self, "implied", frozenset(self.implied))

    @classmethod
    def empty(cls, p):
        return cls(p)

    @property
    def n_ineq(self):
        return self.A.shape[0]

    @property
    def n_eq(self):
        return self.E.shape[0]

    @property
    def n_rows(self):
        """Length of the stacked vector returned by :func:`evaluate`."""
        return self.n_ineq + 2 * self.n_eq + len(self.nonlinear)

    @property
    def is_linear(self):
        return not self.nonlinear

    def __eq__(self, other):
        if not isinstance(other, ConstraintSet):
            return NotImplemented
        return (self.p == other.p and self.implied == other.implied
                and self.nonlinear == other.nonlinear
                and np.array_equal(self.A, other.A) and np.array_equal(self.a, other.a)
                and np.array_equal(self.E, other.E) and np.array_equal(self.e, other.e))

    __hash__ = None

    def linear_only(self):
        """Drop the nonlinear kinds, keeping every linear row."""
        return ConstraintSet(self.p, self.A, self.a, self.E, self.e)

    def rescaled(self, scale):
        """Constraints on ``theta = scale * beta`` (``scale`` positive)."""
        if self.nonlinear:
            raise ValueError("nonlinear constraints cannot be rescaled")
        scale = np.asarray(scale, dtype=np.float64)
        return ConstraintSet(self.p, self.A / scale, self.a, self.E / scale, self.e,
                             implied=self.implied)

    def with_leading_column(self):
        """Embed into ``p + 1`` coordinates with an unconstrained coordinate 0."""
        pad = lambda M: np.hstack([np.zeros((M.shape[0], 1)), M])
        nl = tuple(type(c)(*(i + 1 for i in c.indices())) for c in self.nonlinear)
        return ConstraintSet(self.p + 1, pad(self.A), self.a, pad(self.E), self.e, nl, self.implied)


def _check_beta(cs, beta):
    beta = np.asarray(beta, dtype=np.float64).reshape(-1)
    if beta.size != cs.p:
        raise DataError(f"coefficient vector has length {beta.size}, constraints expect {cs.p}")
    return beta


def evaluate(cs: ConstraintSet, beta) -> np.ndarray:
    """Stacked values ``[A b - a; E b - e; -(E b - e); g_nl(b)]``; feasible iff all <= 0."""
    beta = _check_beta(cs, beta)
    eq = cs.E @ beta - cs.e
    nl = np.array([con.value(beta) for con in cs.nonlinear])
    return np.concatenate([cs.A @ beta - cs.a, eq, -eq, nl])


def evaluate_many(cs: ConstraintSet, B) -> np.ndarray:
    """:func:`evaluate` applied to each row of ``B`` (shape ``(m, p)``)."""
    B = np.asarray(B, dtype=np.float64)
    if B.ndim != 2 or B.shape[1] != cs.p:
        raise DataError(f"expected an array with {cs.p} columns, got shape {B.shape}")
    eq = B @ cs.E.T - cs.e
    parts = [B @ cs.A.T - cs.a, eq, -eq]
    parts.extend(con.values(B)[:, None] for con in cs.nonlinear)
    return np.hstack(parts)


def jacobian(cs: ConstraintSet, beta) -> np.ndarray:
    beta = _check_beta(cs, beta)
    rows = [cs.A, cs.E, -cs.E]
    if cs.nonlinear:
        rows.append(np.array([con.gradient(beta) for con in cs.nonlinear]))
    return np.vstack(rows)


def linearize_at(cs: ConstraintSet, beta0):
    """First-order model ``J beta <= J beta0 - g(beta0)`` of every stacked row.

    Linear rows come back unchanged.  For a convex ``g`` the halfspace
    contains the feasible set; ``NegDet2`` is not convex as a function, so
    its tangent is only guaranteed to be an outer approximation at
    expansion points on the feasible boundary.  Use :func:`outer_cuts` for
    a linearization that is valid everywhere.
    """
    beta0 = _check_beta(cs, beta0)
    J = jacobian(cs, beta0)
    return J, J @ beta0 - evaluate(cs, beta0)


def outer_cuts(cs: ConstraintSet, beta0):
    """Halfspaces from each nonlinear kind's convex representation at ``beta0``."""
    beta0 = _check_beta(cs, beta0)
    if not cs.nonlinear:
        return np.zeros((0, cs.p)), np.zeros(0)
    rows, rhs = zip(*(con.convex_cut(beta0) for con in cs.nonlinear))
    return np.array(rows), np.array(rhs, dtype=np.float64)


def is_feasible(cs: ConstraintSet, beta, tol: float = 1e-9) -> bool:
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    vals = evaluate(cs, beta)
    return bool(vals.size == 0 or vals.max() <= tol)


def _parse_number(tok, line):
    try:
        v = float(tok)
    except ValueError:
        raise ConstraintSyntaxError(f"not a number: {tok!r}", line) from None
    if not np.isfinite(v):
        raise ConstraintSyntaxError(f"non-finite value {tok!r}", line)
    return v


def parse_constraints(text: str, p: int) -> ConstraintSet:
    """Parse the line-oriented constraint format into a normalized set."""
    A, a, E, e, nl = [], [], [], [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, sep, body = line.partition(":")
        if not sep:
            raise ConstraintSyntaxError(f"expected 'lin:' or 'nl:' prefix in {line!r}", lineno)
        head = head.strip().lower()
        toks = body.split()
        if head == "lin":
            ops = [t for t in toks if t in ("<=", ">=", "=")]
            if len(ops) != 1:
                raise ConstraintSyntaxError("a linear constraint needs exactly one of <=, >=, =", lineno)
            pos = toks.index(ops[0])
            coefs, rhs_toks = toks[:pos], toks[pos + 1:]
            if len(coefs) != p:
                raise ConstraintSyntaxError(f"expected {p} coefficients, got {len(coefs)}", lineno)
            if len(rhs_toks) != 1:
                raise ConstraintSyntaxError("expected a single right-hand side", lineno)
            row = np.array([_parse_number(t, lineno) for t in coefs])
            rhs = _parse_number(rhs_toks[0], lineno)
            if not np.any(row):
                raise ConstraintSyntaxError("constraint row is all zeros", lineno)
            if ops[0] == "=":
                E.append(row)
                e.append(rhs)
            elif ops[0] == "<=":
                A.append(row)
                a.append(rhs)
            else:
                A.append(-row + 0.0)
                a.append(-rhs + 0.0)
        elif head == "nl":
            if not toks:
                raise ConstraintSyntaxError("missing nonlinear kind", lineno)
            kind = toks[0].lower()
            if kind not in NONLINEAR_KINDS:
                raise ConstraintSyntaxError(f"unknown nonlinear kind {toks[0]!r}", lineno)
            nl.append(NONLINEAR_KINDS[kind].from_args(toks[1:], p, lineno))
        else:
            raise ConstraintSyntaxError(f"unknown constraint type {head!r}", lineno)

    implied = []
    for con in nl:
        rows, rhs = con.implied_rows(p)
        for r, v in zip(rows, rhs):
            implied.append(len(A))
            A.append(r)
            a.append(v)
    return ConstraintSet(p, np.array(A).reshape(-1, p), np.array(a), np.array(E).reshape(-1, p),
                         np.array(e), tuple(nl), frozenset(implied))


def _fmt(v):
    v = float(v) + 0.0
    return repr(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)


def serialize(cs: ConstraintSet) -> str:
    """Canonical text form; ``parse_constraints(serialize(cs), cs.p) == cs``."""
    lines = []
    for i in range(cs.n_ineq):
        if i in cs.implied:
            continue
        lines.append("lin: " + " ".join(_fmt(v) for v in cs.A[i]) + " <= " + _fmt(cs.a[i]))
    for i in range(cs.n_eq):
        lines.append("lin: " + " ".join(_fmt(v) for v in cs.E[i]) + " = " + _fmt(cs.e[i]))
    lines.extend(con.to_text() for con in cs.nonlinear)
    return "\n".join(lines) + ("\n" if lines else "")


def infer_dimension(text: str) -> int | None:
    """Coefficient count implied by a constraint file, or None if it has no rows.

    Linear rows fix the dimension exactly; nonlinear-only files give the
    largest index used.
    """
    dims = set()
    max_index = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, body = line.partition(":")
        toks = body.split()
        if head.strip().lower() == "lin":
            ops = [i for i, t in enumerate(toks) if t in ("<=", ">=", "=")]
            if ops:
                dims.add(ops[0])
        elif head.strip().lower() == "nl" and len(toks) > 1:
            for t in toks[1:]:
                try:
                    max_index = max(max_index, int(t))
                except ValueError:
                    pass
    if len(dims) > 1:
        raise ConstraintSyntaxError(f"linear rows disagree on the dimension: {sorted(dims)}")
    if dims:
        return dims.pop()
    return max_index or None
