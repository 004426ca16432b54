"""Dense linear programming and least-norm points over polyhedra.

Every problem handled here has the inequality form ``A x <= b`` with free
variables.  Such a problem is solved through its dual,

    min  b.y   s.t.  A^T y = c,  y >= 0,

which is in standard form with only ``n_vars`` equality rows.  The polytopes
in this package live in at most a handful of dimensions but may carry hundreds
of rows, so the dual tableau is far smaller than the primal one.  The primal
optimiser is read back from the optimal dual basis.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .exceptions import DimensionMismatch, Infeasible, NumericalFailure

TOL_LP = 1e-9

_PIVOT_TOL = 1e-11
_COST_TOL = 1e-11


class Sense(str, Enum):
    MAXIMIZE = "maximize"
    MINIMIZE = "minimize"


class Status(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LinearProgram:
    """Optimise ``objective . x`` subject to ``constraint_matrix @ x <= rhs``."""

    objective: np.ndarray
    constraint_matrix: np.ndarray
    rhs: np.ndarray
    sense: Sense = Sense.MAXIMIZE

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.objective, dtype=float))
        A = np.asarray(self.constraint_matrix, dtype=float)
        b = np.atleast_1d(np.asarray(self.rhs, dtype=float))
        if A.ndim == 1 and A.size == 0:
            A = A.reshape(0, c.size)
        if c.ndim != 1 or A.ndim != 2 or b.ndim != 1:
            raise DimensionMismatch("objective and rhs must be vectors, constraint_matrix a matrix")
        if A.shape[1] != c.size:
            raise DimensionMismatch(
                f"objective has {c.size} entries but constraint_matrix has {A.shape[1]} columns")
        if A.shape[0] != b.size:
            raise DimensionMismatch(
                f"rhs has {b.size} entries but constraint_matrix has {A.shape[0]} rows")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "constraint_matrix", A)
        object.__setattr__(self, "rhs", b)
        object.__setattr__(self, "sense", Sense(self.sense))


@dataclass(frozen=True)
class LpOutcome:
    status: Status
    point: np.ndarray = None
    value: float = None

    @property
    def optimal(self):
        return self.status is Status.OPTIMAL


def _pivot(T, row, col):
    T[row] /= T[row, col]
    column = T[:, col].copy()
    column[row] = 0.0
    T -= np.outer(column, T[row])


def _run_bland(T, basis, n_allowed, max_pivots):
    """Primal simplex on a tableau whose last row holds reduced costs.

    Entering columns follow Dantzig's most-negative rule; after a run of
    degenerate pivots the loop switches to Bland's rule, which cannot cycle.
    Returns ``"optimal"`` or ``"unbounded"``.  Only the first ``n_allowed``
    columns may enter the basis.
    """
    k = T.shape[0] - 1
    stall, bland = 0, False
    for _ in range(max_pivots):
        costs = T[-1, :n_allowed]
        if bland:
            candidates = np.flatnonzero(costs < -_COST_TOL)
            if candidates.size == 0:
                return "optimal"
            col = candidates[0]
        else:
            col = int(np.argmin(costs))
            if costs[col] >= -_COST_TOL:
                return "optimal"
        column = T[:k, col]
        positive = column > _PIVOT_TOL
        if not positive.any():
            return "unbounded"
        ratios = np.full(k, np.inf)
        ratios[positive] = T[:k, -1][positive] / column[positive]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))
        row = min(ties, key=lambda i: basis[i])
        stall = stall + 1 if best <= 1e-12 else 0
        if stall > k + 1:
            bland = True
        _pivot(T, row, col)
        basis[row] = col
    raise NumericalFailure(f"simplex exceeded {max_pivots} pivots")


def simplex_standard_form(c, A, b, max_pivots=None):
    """Two-phase simplex for ``min c.y  s.t.  A y = b, y >= 0``.

    Returns ``(status, y, basis)`` where ``basis`` lists the columns of ``A``
    that are basic at the optimum (redundant equality rows are dropped, so it
    may be shorter than ``A.shape[0]``).
    """
    c = np.asarray(c, dtype=float)
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    k, m = A.shape
    if max_pivots is None:
        max_pivots = 50 * (k + m) + 100

    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1

    T = np.zeros((k + 1, m + k + 1))
    T[:k, :m] = A
    T[:k, m:m + k] = np.eye(k)
    T[:k, -1] = b
    T[-1, :m] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(m, m + k))

    _run_bland(T, basis, m, max_pivots)
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    if -T[-1, -1] > TOL_LP * scale:
        return Status.INFEASIBLE, None, None

    # drive artificial variables out of the basis; rows where that fails are redundant
    keep = []
    for i in range(k):
        if basis[i] >= m:
            row = T[i, :m]
            j = int(np.argmax(np.abs(row))) if m else 0
            if m and abs(row[j]) > 1e-9:
                _pivot(T, i, j)
                basis[i] = j
                keep.append(i)
        else:
            keep.append(i)
    T = np.vstack([T[keep], T[-1:]])
    basis = [basis[i] for i in keep]
    T = np.hstack([T[:, :m], T[:, -1:]])

    T[-1, :] = 0.0
    T[-1, :m] = c
    for i, j in enumerate(basis):
        T[-1] -= c[j] * T[i]
    status = _run_bland(T, basis, m, max_pivots)
    if status == "unbounded":
        return Status.UNBOUNDED, None, basis
    y = np.zeros(m)
    y[basis] = np.maximum(T[:-1, -1], 0.0)
    return Status.OPTIMAL, y, basis


def _dual_solve(c, A, b):
    """Solve ``max c.x s.t. A x <= b`` (free x) through the dual problem."""
    n = c.size
    m = A.shape[0]
    if m == 0:
        if np.all(np.abs(c) <= _COST_TOL):
            return LpOutcome(Status.OPTIMAL, np.zeros(n), 0.0)
        return LpOutcome(Status.UNBOUNDED)
    status, _, basis = simplex_standard_form(b, A.T, c)
    if status is Status.OPTIMAL:
        if basis:
            x = np.linalg.lstsq(A[basis], b[basis], rcond=None)[0]
        else:
            x = np.zeros(n)
        return LpOutcome(Status.OPTIMAL, x, float(c @ x))
    if status is Status.UNBOUNDED:
        return LpOutcome(Status.INFEASIBLE)
    # dual infeasible: the primal is either unbounded or infeasible
    if is_feasible(A, b):
        return LpOutcome(Status.UNBOUNDED)
    return LpOutcome(Status.INFEASIBLE)


def is_feasible(A, b):
    """True iff ``{x : A x <= b}`` is nonempty."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.shape[0] == 0:
        return True
    if A.shape[1] == 0:
        return bool(np.all(b >= -TOL_LP))
    # the dual of "max 0" is feasible at y = 0 and unbounded iff the primal is empty
    status, _, _ = simplex_standard_form(b, A.T, np.zeros(A.shape[1]))
    return status is Status.OPTIMAL


def solve_lp(lp):
    """Solve a :class:`LinearProgram` and return an :class:`LpOutcome`.

    The returned point of an optimal outcome is a vertex of the feasible region
    whenever the region has one.
    """
    if not isinstance(lp, LinearProgram):
        raise TypeError("solve_lp expects a LinearProgram")
    c = lp.objective if lp.sense is Sense.MAXIMIZE else -lp.objective
    out = _dual_solve(c, lp.constraint_matrix, lp.rhs)
    if out.status is Status.OPTIMAL:
        return LpOutcome(Status.OPTIMAL, out.point, float(lp.objective @ out.point))
    return out


def maximize(c, A, b):
    """Shorthand for ``solve_lp(LinearProgram(c, A, b, "maximize"))``."""
    return solve_lp(LinearProgram(c, A, b, Sense.MAXIMIZE))


def min_norm_point(constraint_matrix, rhs, max_iter=None):
    """Euclidean-norm-minimal point of ``{u : G u <= h}``.

    Primal active-set descent on ``0.5 * |u|^2`` started from a feasible vertex.

    Raises
    ------
    Infeasible
        If the region is empty.
    NumericalFailure
        If the active-set loop exceeds ``100 * n_vars`` iterations.
    """
    G = np.asarray(constraint_matrix, dtype=float)
    h = np.asarray(rhs, dtype=float)
    if G.ndim != 2 or h.ndim != 1 or G.shape[0] != h.size:
        raise DimensionMismatch("constraint_matrix must be (rows, n_vars) and rhs (rows,)")
    n = G.shape[1]
    if n == 0:
        if np.all(h >= -TOL_LP):
            return np.zeros(0)
        raise Infeasible("empty region")
    if np.all(h >= -TOL_LP):
        return np.zeros(n)

    start = maximize(np.zeros(n), G, h)
    if start.status is not Status.OPTIMAL:
        raise Infeasible("empty region")
    u = start.point
    if max_iter is None:
        max_iter = 100 * n

    # start with an empty working set: every step is feasible because blocking
    # constraints are added as they are met
    working = []
    for _ in range(max_iter):
        if working:
            Gw = G[working]
            # projection of -u onto the null space of the working rows
            coef = np.linalg.lstsq(Gw @ Gw.T, Gw @ u, rcond=None)[0]
            p = -u + Gw.T @ coef
        else:
            p = -u
        if np.linalg.norm(p) <= 1e-12 * max(1.0, np.linalg.norm(u)):
            if not working:
                return u
            mult = np.linalg.lstsq(G[working].T, -u, rcond=None)[0]
            worst = int(np.argmin(mult))
            if mult[worst] >= -1e-12:
                return u
            working.pop(worst)
            continue
        slope = G @ p
        slack = h - G @ u
        step, blocking = 1.0, None
        for j in np.flatnonzero(slope > 1e-14):
            if j in working:
                continue
            t = max(slack[j], 0.0) / slope[j]
            if t < step:
                step, blocking = t, j
        u = u + step * p
        if blocking is not None:
            working.append(int(blocking))
    raise NumericalFailure(f"min_norm_point exceeded {max_iter} active-set iterations")
