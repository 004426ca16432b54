"""Half-space polytopes and the set algebra used by the synthesis algorithms.

A polytope is stored as ``{x : normals @ x <= offsets}``.  Rows are scaled to
unit infinity-norm at construction so geometric tolerances are scale free.
Representations may be redundant; no operation relies on irredundancy for its
set semantics.
"""

import itertools
import logging

import numpy as np

from . import lp
from .exceptions import (
    DegenerateGeometry,
    DimensionMismatch,
    EmptySet,
    UnboundedDirection,
    UnsupportedDimension,
)

logger = logging.getLogger(__name__)

TOL_GEOM = 1e-7

_ZERO_ROW = 1e-12
_RADIUS_CAP = 1e9


def _normalize(A, b):
    """Scale rows to unit inf-norm and drop trivial rows.

    Returns ``(A, b, empty)`` where ``empty`` flags a zero row with a negative
    offset.
    """
    scale = np.abs(A).max(axis=1) if A.shape[1] else np.zeros(A.shape[0])
    zero = scale <= _ZERO_ROW
    empty = bool(np.any(b[zero] < -TOL_GEOM))
    A = A[~zero] / scale[~zero, None]
    b = b[~zero] / scale[~zero]
    return A, b, empty


class HPolytope:
    """Convex polyhedron ``{x : normals @ x <= offsets}``.

    Instances are immutable.  A zero normal row with a negative offset does not
    get silently dropped: it turns the polytope into the canonical empty set
    ``{x : 0 @ x <= -1}``.
    """

    __slots__ = ("_A", "_b", "_dim", "_is_empty", "_cheb", "__weakref__")

    def __init__(self, normals, offsets, dim=None):
        A = np.array(normals, dtype=float)
        b = np.array(offsets, dtype=float).reshape(-1)
        if A.ndim == 1 and A.size == 0:
            if dim is None:
                raise DimensionMismatch("dim is required when there are no rows")
            A = A.reshape(0, dim)
        if A.ndim != 2:
            raise DimensionMismatch("normals must be a 2-D array")
        if dim is not None and A.shape[1] != dim:
            raise DimensionMismatch(f"normals have {A.shape[1]} columns, expected {dim}")
        if A.shape[0] != b.size:
            raise DimensionMismatch(f"{A.shape[0]} normal rows but {b.size} offsets")
        if A.shape[1] < 1:
            raise DimensionMismatch("dimension must be positive")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("polytope data must be finite")
        n = A.shape[1]
        A, b, empty = _normalize(A, b)
        if empty:
            A, b = np.zeros((1, n)), np.array([-1.0])
        A.setflags(write=False)
        b.setflags(write=False)
        self._A, self._b, self._dim = A, b, n
        self._is_empty = True if empty else None
        self._cheb = None

    @classmethod
    def _raw(cls, A, b, dim, empty=None):
        # trusted constructor for already-normalised data
        P = cls.__new__(cls)
        A = np.ascontiguousarray(A, dtype=float).reshape(-1, dim)
        b = np.ascontiguousarray(b, dtype=float).reshape(-1)
        A.setflags(write=False)
        b.setflags(write=False)
        P._A, P._b, P._dim = A, b, dim
        P._is_empty = empty
        P._cheb = None
        return P

    # constructors -----------------------------------------------------------------

    @classmethod
    def box(cls, lower, upper):
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise DimensionMismatch("lower and upper must be vectors of equal length")
        n = lower.size
        eye = np.eye(n)
        return cls(np.vstack([eye, -eye]), np.concatenate([upper, -lower]))

    @classmethod
    def from_bounds(cls, bounds):
        """Box from a sequence of ``(lo, hi)`` pairs."""
        bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
        return cls.box(bounds[:, 0], bounds[:, 1])

    @classmethod
    def unit_ball(cls, dim):
        """Closed unit ball of the infinity norm."""
        return cls.box(-np.ones(dim), np.ones(dim))

    @classmethod
    def universe(cls, dim):
        return cls(np.zeros((0, dim)), np.zeros(0), dim=dim)

    @classmethod
    def empty(cls, dim):
        return cls._raw(np.zeros((1, dim)), np.array([-1.0]), dim, empty=True)

    @classmethod
    def point(cls, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return cls.box(x, x)

    # accessors --------------------------------------------------------------------

    @property
    def normals(self):
        return self._A

    @property
    def offsets(self):
        return self._b

    A = normals
    b = offsets

    @property
    def dim(self):
        return self._dim

    @property
    def n_rows(self):
        return self._b.size

    @property
    def is_canonical_empty(self):
        return self._b.size == 1 and not self._A.any() and self._b[0] < 0

    def __repr__(self):
        return f"HPolytope(dim={self._dim}, n_rows={self.n_rows})"

    def __contains__(self, x):
        return contains_point(self, x)

    def scaled(self, factor):
        """``factor * P`` for a positive factor."""
        if factor <= 0:
            raise ValueError("factor must be positive")
        return HPolytope._raw(self._A, self._b * factor, self._dim, self._is_empty)

    def translated(self, t):
        t = np.asarray(t, dtype=float)
        return HPolytope._raw(self._A, self._b + self._A @ t, self._dim, self._is_empty)


# ---------------------------------------------------------------------------------
# LP-backed queries


def _check_dim(P, n, what="vector"):
    if P.dim != n:
        raise DimensionMismatch(f"{what} has dimension {n}, polytope has dimension {P.dim}")


def support(P, d):
    """``max { d.x : x in P }``."""
    d = np.atleast_1d(np.asarray(d, dtype=float))
    _check_dim(P, d.size, "direction")
    if P._is_empty:
        raise EmptySet("support of an empty polytope")
    out = lp.maximize(d, P.A, P.b)
    if out.status is lp.Status.INFEASIBLE:
        P._is_empty = True
        raise EmptySet("support of an empty polytope")
    if out.status is lp.Status.UNBOUNDED:
        raise UnboundedDirection(f"polytope is unbounded in direction {d}")
    return out.value


def is_empty(P):
    if P._is_empty is None:
        P._is_empty = not lp.is_feasible(P.A, P.b)
    return P._is_empty


def contains_point(P, x, tol=TOL_GEOM):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    _check_dim(P, x.size, "point")
    return bool(np.all(P.A @ x - P.b <= tol))


def contains_points(P, X, tol=TOL_GEOM):
    """Vectorised membership for the rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    _check_dim(P, X.shape[1], "points")
    return np.all(X @ P.A.T - P.b <= tol, axis=1)


def contains_set(P, Q, tol=TOL_GEOM):
    """Is ``P`` a subset of ``Q``?"""
    if P.dim != Q.dim:
        raise DimensionMismatch(f"dimensions differ: {P.dim} vs {Q.dim}")
    if is_empty(P):
        return True
    for g, c in zip(Q.A, Q.b):
        if support(P, g) > c + tol:
            return False
    return True


def equals(P, Q, tol=TOL_GEOM):
    """Set equality by mutual containment."""
    return contains_set(P, Q, tol) and contains_set(Q, P, tol)


def is_bounded(P):
    if is_empty(P):
        return True
    try:
        bounding_box(P)
    except UnboundedDirection:
        return False
    return True


def bounding_box(P):
    """Axis-aligned bounds ``(lower, upper)`` of a nonempty polytope."""
    n = P.dim
    eye = np.eye(n)
    upper = np.array([support(P, eye[k]) for k in range(n)])
    lower = np.array([-support(P, -eye[k]) for k in range(n)])
    return lower, upper


def chebyshev_center(P):
    """Center and radius of the largest infinity-norm ball inside ``P``.

    Raises :class:`EmptySet` for empty polytopes.  For unbounded polytopes the
    radius is capped at a large constant.
    """
    if P._cheb is None:
        if P._is_empty:
            raise EmptySet("empty polytope has no Chebyshev center")
        n = P.dim
        A = P.A
        l1 = np.abs(A).sum(axis=1)
        G = np.vstack([np.hstack([A, l1[:, None]]), np.eye(n + 1)[-1:]])
        h = np.concatenate([P.b, [_RADIUS_CAP]])
        c = np.zeros(n + 1)
        c[-1] = 1.0
        out = lp.maximize(c, G, h)
        if out.status is not lp.Status.OPTIMAL or out.value < -lp.TOL_LP:
            if is_empty(P):
                raise EmptySet("empty polytope has no Chebyshev center")
            # nonempty but the radius LP is numerically marginal
            P._cheb = (_feasible_point(P), 0.0)
        else:
            P._cheb = (out.point[:n], max(out.point[n], 0.0))
    center, radius = P._cheb
    return center.copy(), radius


def _feasible_point(P):
    out = lp.maximize(np.zeros(P.dim), P.A, P.b)
    if out.status is not lp.Status.OPTIMAL:
        raise EmptySet("polytope is empty")
    return out.point


def distance(P, x):
    """Infinity-norm distance from ``x`` to ``P`` (zero inside)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    _check_dim(P, x.size, "point")
    if contains_point(P, x, tol=0.0):
        return 0.0
    n = P.dim
    eye = np.eye(n)
    one = np.ones((n, 1))
    G = np.vstack([
        np.hstack([P.A, np.zeros((P.n_rows, 1))]),
        np.hstack([-eye, -one]),
        np.hstack([eye, -one]),
    ])
    h = np.concatenate([P.b, -x, x])
    c = np.zeros(n + 1)
    c[-1] = -1.0
    out = lp.maximize(c, G, h)
    if out.status is not lp.Status.OPTIMAL:
        raise EmptySet("distance to an empty polytope")
    return -out.value


# ---------------------------------------------------------------------------------
# redundancy removal


def _dedupe(A, b):
    keys = np.round(A, 9)
    _, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    order = np.lexsort((b, inverse))
    first = np.ones(order.size, dtype=bool)
    first[1:] = inverse[order][1:] != inverse[order][:-1]
    keep = np.sort(order[first])
    return keep


def _irredundant_rows(A, b, tol=TOL_GEOM):
    """Indices of an irredundant subset of the rows, or ``None`` if empty.

    ``A`` must already be normalised.
    """
    m, n = A.shape
    if m == 0:
        return np.arange(0)
    idx = _dedupe(A, b)
    A, b = A[idx], b[idx]
    m = idx.size

    l1 = np.abs(A).sum(axis=1)
    G = np.vstack([np.hstack([A, l1[:, None]]), np.eye(n + 1)[-1:]])
    h = np.concatenate([b, [_RADIUS_CAP]])
    c = np.zeros(n + 1)
    c[-1] = 1.0
    out = lp.maximize(c, G, h)
    if out.status is not lp.Status.OPTIMAL:
        return None
    center, radius = out.point[:n], out.point[n]
    if radius < -lp.TOL_LP and not lp.is_feasible(A, b):
        return None

    status = np.zeros(m, dtype=np.int8)  # 0 unknown, 1 facet, -1 redundant

    if radius > 1e-9 and m > 1:
        rng = np.random.default_rng(m * 7919 + n)
        D = np.hstack([np.eye(n), -np.eye(n), rng.normal(size=(n, min(max(32, 2 * m), 512)))])
        AD = A @ D
        slack = np.maximum(b - A @ center, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            T = np.where(AD > 1e-12, slack[:, None] / AD, np.inf)
        if m >= 2:
            part = np.partition(T, 1, axis=0)
            first, second = part[0], part[1]
            hit = np.argmin(T, axis=0)
            unique = np.isfinite(first) & (second > first * (1 + 1e-6) + 1e-12)
            status[hit[unique]] = 1

    if m > 4 * n:
        box = []
        for k in range(n):
            for s in (1.0, -1.0):
                e = np.zeros(n)
                e[k] = s
                r = lp.maximize(e, A, b)
                box.append(r.value if r.status is lp.Status.OPTIMAL else np.inf)
        upper = np.array(box[0::2])
        lower = -np.array(box[1::2])
        if np.all(np.isfinite(upper)) and np.all(np.isfinite(lower)):
            # a row that is nowhere tight on P is redundant; the margin keeps rows
            # that define the box itself
            boxmax = np.where(A > 0, A * upper, A * lower).sum(axis=1)
            status[(status == 0) & (boxmax < b - 1e-6)] = -1

    if radius > 1e-9:
        _clarkson(A, b, center, status, tol)
    alive = status >= 0
    for j in np.flatnonzero(status == 0):
        alive[j] = False
        if _implied(A, b, np.flatnonzero(alive), j, tol):
            continue
        alive[j] = True
    return idx[np.flatnonzero(alive)]


def _implied(A, b, rows, j, tol):
    Aj = np.vstack([A[rows], A[j]])
    bj = np.concatenate([b[rows], [b[j] + 1.0]])
    r = lp.maximize(A[j], Aj, bj)
    return r.status is lp.Status.OPTIMAL and r.value <= b[j] + tol


def _clarkson(A, b, center, status, tol):
    """Classify the unknown rows with LPs over the known facets only.

    A row not implied by the known facets yields a point outside the polytope;
    the ray from the interior ``center`` to that point leaves through a new
    facet, which is added before the row is tested again.  Ambiguous rays are
    left for the exhaustive test.
    """
    slack = b - A @ center
    for j in np.flatnonzero(status == 0):
        while status[j] == 0:
            facets = np.flatnonzero(status == 1)
            Aj = np.vstack([A[facets], A[j]])
            bj = np.concatenate([b[facets], [b[j] + 1.0]])
            r = lp.maximize(A[j], Aj, bj)
            if r.status is not lp.Status.OPTIMAL:
                # the known facets do not bound this direction yet
                live = np.flatnonzero(status >= 0)
                bl = b[live].copy()
                bl[live == j] += 1.0
                r = lp.maximize(A[j], A[live], bl)
                if r.status is not lp.Status.OPTIMAL:
                    return
            if r.value <= b[j] + tol:
                status[j] = -1
                break
            d = r.point - center
            rate = A @ d
            live = (status >= 0) & (rate > 1e-12)
            t = np.full(len(b), np.inf)
            t[live] = slack[live] / rate[live]
            order = np.argsort(t)
            first, second = t[order[0]], t[order[1]] if len(t) > 1 else np.inf
            if not np.isfinite(first) or second <= first * (1 + 1e-9) + 1e-12:
                break
            status[order[0]] = 1


def remove_redundancy(P):
    """Equivalent polytope without redundant rows (canonical empty if empty)."""
    if P._is_empty:
        return HPolytope.empty(P.dim)
    keep = _irredundant_rows(P.A, P.b)
    if keep is None:
        return HPolytope.empty(P.dim)
    Q = HPolytope._raw(P.A[keep], P.b[keep], P.dim, empty=False)
    return Q


# ---------------------------------------------------------------------------------
# set operations


def intersect(P, Q):
    if P.dim != Q.dim:
        raise DimensionMismatch(f"dimensions differ: {P.dim} vs {Q.dim}")
    if P._is_empty or Q._is_empty:
        return HPolytope.empty(P.dim)
    R = HPolytope._raw(np.vstack([P.A, Q.A]), np.concatenate([P.b, Q.b]), P.dim)
    return remove_redundancy(R)


def _require_bounded_nonempty(P, what="polytope"):
    if is_empty(P):
        raise EmptySet(f"{what} is empty")


def minkowski_sum_ball(P, eps):
    """``P + eps * B`` with ``B`` the unit infinity-norm ball.

    Each facet row is shifted by its support on the ball and axis rows are
    added.  In one and two dimensions this is the exact sum; in higher
    dimensions every row still supports the sum, so the result is a tight
    outer bound.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    _require_bounded_nonempty(P)
    n = P.dim
    eye = np.eye(n)
    axes = np.vstack([eye, -eye])
    axis_off = np.array([support(P, d) for d in axes])
    A = np.vstack([P.A, axes])
    b = np.concatenate([P.b + eps * np.abs(P.A).sum(axis=1), axis_off + eps])
    return HPolytope._raw(A, b, n, empty=False)


def _segment_sum_arrays(A, b, g, tol=TOL_GEOM):
    """Rows of ``{y : A y <= b} + [-g, g]`` before redundancy removal."""
    ag = A @ g
    shifted = b + np.abs(ag)
    P_ = np.flatnonzero(ag > tol)
    N_ = np.flatnonzero(ag < -tol)
    if P_.size == 0 or N_.size == 0:
        return A, shifted
    # eliminate t from  A y - t (A g) <= b,  |t| <= 1
    Ap = A[P_] / ag[P_, None]
    bp = b[P_] / ag[P_]
    An = A[N_] / -ag[N_, None]
    bn = b[N_] / -ag[N_]
    pairA = (Ap[:, None, :] + An[None, :, :]).reshape(-1, A.shape[1])
    pairb = (bp[:, None] + bn[None, :]).reshape(-1)
    return np.vstack([A, pairA]), np.concatenate([shifted, pairb])


def minkowski_sum_segment(P, g):
    """``P + {t g : |t| <= 1}`` (exact, any dimension)."""
    g = np.asarray(g, dtype=float).reshape(-1)
    if g.size != P.dim:
        raise DimensionMismatch(f"segment has dimension {g.size}, polytope has {P.dim}")
    if P._is_empty:
        return HPolytope.empty(P.dim)
    if not np.any(g):
        return P
    A, b = _segment_sum_arrays(P.A, P.b, g)
    logger.debug("segment sum: %d rows before pruning", len(b))
    A, b, empty = _normalize(A, b)
    if empty:
        return HPolytope.empty(P.dim)
    keep = _irredundant_rows(A, b)
    if keep is None:
        return HPolytope.empty(P.dim)
    return HPolytope._raw(A[keep], b[keep], P.dim, empty=False)


def pontryagin_diff(P, Q):
    """``P - Q = {x : x + Q is a subset of P}``."""
    if P.dim != Q.dim:
        raise DimensionMismatch(f"dimensions differ: {P.dim} vs {Q.dim}")
    if is_empty(Q):
        raise EmptySet("subtrahend is empty")
    if P._is_empty:
        return HPolytope.empty(P.dim)
    shift = np.array([support(Q, g) for g in P.A])
    return remove_redundancy(HPolytope._raw(P.A, P.b - shift, P.dim))


def erode_by_support(P, support_values):
    """Shift every row of ``P`` inwards by the given amounts."""
    return remove_redundancy(HPolytope._raw(P.A, P.b - support_values, P.dim))


def affine_preimage(P, M, c=None):
    """``{x : M x + c in P}``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != P.dim:
        raise DimensionMismatch(f"map has {M.shape[0]} outputs, polytope has dimension {P.dim}")
    c = np.zeros(P.dim) if c is None else np.asarray(c, dtype=float)
    if P._is_empty:
        return HPolytope.empty(M.shape[1])
    return HPolytope(P.A @ M, P.b - P.A @ c, dim=M.shape[1])


def affine_image(P, M, c=None):
    """``{M x + c : x in P}`` for a bounded nonempty ``P``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[1] != P.dim:
        raise DimensionMismatch(f"map takes {M.shape[1]} inputs, polytope has dimension {P.dim}")
    q, n = M.shape
    c = np.zeros(q) if c is None else np.asarray(c, dtype=float)
    _require_bounded_nonempty(P)
    if q == n and np.linalg.matrix_rank(M) == n and np.linalg.cond(M) < 1e10:
        Minv = np.linalg.inv(M)
        A = P.A @ Minv
        return remove_redundancy(HPolytope(A, P.b + A @ c))
    # variables (y, x): y - M x = c, x in P; eliminate x
    A = np.hstack([np.zeros((P.n_rows, q)), P.A])
    E = np.hstack([np.eye(q), -M])
    Ar, br = _project_arrays(A, P.b, list(range(q)), E, c)
    if Ar is None:
        return HPolytope.empty(q)
    return HPolytope._raw(Ar, br, q, empty=False)


def minkowski_sum(P, Q):
    """``P + Q`` as the projection of ``{(x, y) : y in Q, x - y in P}``."""
    if P.dim != Q.dim:
        raise DimensionMismatch(f"dimensions differ: {P.dim} vs {Q.dim}")
    _require_bounded_nonempty(P)
    _require_bounded_nonempty(Q)
    n = P.dim
    A = np.vstack([
        np.hstack([np.zeros((Q.n_rows, n)), Q.A]),
        np.hstack([P.A, -P.A]),
    ])
    b = np.concatenate([Q.b, P.b])
    Ar, br = _project_arrays(A, b, list(range(n)))
    if Ar is None:
        return HPolytope.empty(n)
    return HPolytope._raw(Ar, br, n, empty=False)


def cartesian_product(P, Q):
    n = P.dim + Q.dim
    if P._is_empty or Q._is_empty:
        return HPolytope.empty(n)
    A = np.block([
        [P.A, np.zeros((P.n_rows, Q.dim))],
        [np.zeros((Q.n_rows, P.dim)), Q.A],
    ])
    return HPolytope._raw(A, np.concatenate([P.b, Q.b]), n)


def product(polytopes):
    polytopes = list(polytopes)
    out = polytopes[0]
    for P in polytopes[1:]:
        out = cartesian_product(out, P)
    return out


# ---------------------------------------------------------------------------------
# Fourier-Motzkin projection


_CHERNIKOV = False


def _substitute_equalities(A, b, E, e, elim):
    """Use equality rows to remove variables in ``elim`` by substitution."""
    elim = list(elim)
    E = E.copy()
    e = e.copy()
    A = A.copy()
    b = b.copy()
    removed = []
    while E.shape[0] and elim:
        sub = np.abs(E[:, elim])
        r, k = np.unravel_index(np.argmax(sub), sub.shape)
        if sub[r, k] <= _ZERO_ROW:
            break
        j = elim[k]
        row, rhs = E[r] / E[r, j], e[r] / E[r, j]
        b = b - A[:, j] * rhs
        A = A - np.outer(A[:, j], row)
        e = e - E[:, j] * rhs
        E = E - np.outer(E[:, j], row)
        E = np.delete(E, r, axis=0)
        e = np.delete(e, r)
        A[:, j] = 0.0
        E[:, j] = 0.0
        removed.append(j)
        elim.remove(j)
    # leftover equalities become inequality pairs
    if E.shape[0]:
        A = np.vstack([A, E, -E])
        b = np.concatenate([b, e, -e])
    return A, b, elim, removed


def _project_arrays(A, b, keep, E=None, e=None, tol=TOL_GEOM):
    """Project ``{z : A z <= b, E z = e}`` onto the coordinates ``keep``.

    Equalities are eliminated by substitution, remaining variables by
    Fourier-Motzkin with LP redundancy removal after every step.  Chernikov's
    history rule sits behind ``_CHERNIKOV`` and is off: it is not sound once
    rows are pruned between steps.  Returns normalised ``(A, b)`` in the ``keep``
    coordinates, or ``(None, None)`` if the set is empty.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    d = A.shape[1]
    keep = list(keep)
    elim = [j for j in range(d) if j not in keep]
    if E is not None and len(E):
        A, b, elim, _ = _substitute_equalities(A, b, np.atleast_2d(E), np.atleast_1d(e), elim)

    A, b, empty = _normalize(A, b)
    if empty:
        return None, None
    hist = np.eye(A.shape[0], dtype=bool)
    keep_idx = _irredundant_rows(A, b, tol)
    if keep_idx is None:
        return None, None
    A, b, hist = A[keep_idx], b[keep_idx], hist[keep_idx]
    steps = 0
    elim = list(elim)
    while elim:
        coef = A[:, elim]
        pos = (coef > tol).sum(axis=0)
        neg = (coef < -tol).sum(axis=0)
        k = int(np.argmin(pos * neg))
        j = elim.pop(k)
        col = A[:, j]
        P_ = np.flatnonzero(col > tol)
        N_ = np.flatnonzero(col < -tol)
        Z_ = np.flatnonzero(np.abs(col) <= tol)
        steps += 1
        blocks_A = [A[Z_]]
        blocks_b = [b[Z_]]
        blocks_h = [hist[Z_]]
        if P_.size and N_.size:
            Ap = A[P_] / col[P_, None]
            bp = b[P_] / col[P_]
            An = A[N_] / -col[N_, None]
            bn = b[N_] / -col[N_]
            newA = (Ap[:, None, :] + An[None, :, :]).reshape(-1, A.shape[1])
            newb = (bp[:, None] + bn[None, :]).reshape(-1)
            newh = (hist[P_][:, None, :] | hist[N_][None, :, :]).reshape(-1, hist.shape[1])
            ok = newh.sum(axis=1) <= (steps + 1 if _CHERNIKOV else 10**9)
            blocks_A.append(newA[ok])
            blocks_b.append(newb[ok])
            blocks_h.append(newh[ok])
        A = np.vstack(blocks_A)
        b = np.concatenate(blocks_b)
        hist = np.vstack(blocks_h)
        A[:, j] = 0.0
        A, b, hist = _renormalize_with_history(A, b, hist)
        if A is None:
            return None, None
        if A.shape[0] == 0:
            break
        if not _CHERNIKOV:
            sub = A[:, keep + elim]
            keep_idx = _irredundant_rows(sub, b, tol)
            if keep_idx is None:
                return None, None
            A, b, hist = A[keep_idx], b[keep_idx], hist[keep_idx]
    if _CHERNIKOV and A.shape[0]:
        keep_idx = _irredundant_rows(A[:, keep], b, tol)
        if keep_idx is None:
            return None, None
        A, b = A[keep_idx], b[keep_idx]
    Ak, bk, empty = _normalize(A[:, keep], b)
    if empty:
        return None, None
    return Ak, bk


def _renormalize_with_history(A, b, hist):
    scale = np.abs(A).max(axis=1) if A.shape[0] else np.zeros(0)
    zero = scale <= _ZERO_ROW
    if np.any(b[zero] < -TOL_GEOM):
        return None, None, None
    keep = ~zero
    return A[keep] / scale[keep, None], b[keep] / scale[keep], hist[keep]


def eliminate(P, var_index):
    """Project out one coordinate (exact Fourier-Motzkin elimination)."""
    if not 0 <= var_index < P.dim:
        raise DimensionMismatch(f"variable index {var_index} out of range for dim {P.dim}")
    keep = [k for k in range(P.dim) if k != var_index]
    return project(P, keep)


def project(P, keep_dims):
    """Projection onto the coordinates ``keep_dims`` (in the given order)."""
    keep = [int(k) for k in keep_dims]
    if not keep or any(k < 0 or k >= P.dim for k in keep) or len(set(keep)) != len(keep):
        raise DimensionMismatch(f"invalid keep_dims {keep_dims} for dim {P.dim}")
    if P._is_empty:
        return HPolytope.empty(len(keep))
    Ar, br = _project_arrays(P.A, P.b, keep)
    if Ar is None:
        return HPolytope.empty(len(keep))
    return HPolytope._raw(Ar, br, len(keep), empty=False)


# ---------------------------------------------------------------------------------
# vertices and sampling


def vertices_2d(P):
    """Counter-clockwise vertex cycle of a bounded, full-dimensional 2-D polytope."""
    if P.dim != 2:
        raise UnsupportedDimension("vertices_2d requires a 2-D polytope")
    Q = remove_redundancy(P)
    if Q._is_empty:
        raise EmptySet("polytope is empty")
    if not is_bounded(Q):
        raise UnboundedDirection("polytope is unbounded")
    _, radius = chebyshev_center(Q)
    if radius <= 1e-9:
        raise DegenerateGeometry("polytope has empty interior")
    A, b = Q.A, Q.b
    order = np.argsort(np.arctan2(A[:, 1], A[:, 0]))
    A, b = A[order], b[order]
    m = len(b)
    verts = []
    for i in range(m):
        j = (i + 1) % m
        M = np.vstack([A[i], A[j]])
        verts.append(np.linalg.solve(M, [b[i], b[j]]))
    verts = np.array(verts)
    # drop coincident consecutive vertices
    out = [verts[0]]
    for v in verts[1:]:
        if np.abs(v - out[-1]).max() > 1e-9:
            out.append(v)
    if len(out) > 1 and np.abs(out[0] - out[-1]).max() <= 1e-9:
        out.pop()
    out = np.array(out)
    start = np.lexsort((out[:, 1], out[:, 0]))[0]
    return np.roll(out, -start, axis=0)


def box_bounds(P):
    """``(lower, upper)`` if ``P`` is an axis-aligned box, else ``None``."""
    _require_bounded_nonempty(P)
    lower, upper = bounding_box(P)
    if contains_set(HPolytope.box(lower, upper), P):
        return lower, upper
    return None


def extreme_points(P):
    """Vertices of a box (any dimension) or of a 1-D/2-D polytope."""
    bounds = box_bounds(P)
    if bounds is not None:
        lower, upper = bounds
        corners = np.array(list(itertools.product(*zip(lower, upper))))
        return np.unique(corners, axis=0)
    if P.dim == 2:
        return vertices_2d(P)
    raise UnsupportedDimension("vertex enumeration is limited to boxes and 2-D polytopes")


def sample_points(P, n_samples, rng=None):
    """Random points of a bounded nonempty polytope.

    Rejection sampling from the bounding box, topped up with hit-and-run when
    the acceptance rate is poor.  Not uniform in the hit-and-run branch.
    """
    rng = np.random.default_rng(rng)
    _require_bounded_nonempty(P)
    lower, upper = bounding_box(P)
    pts = []
    need = n_samples
    for _ in range(20):
        if need <= 0:
            break
        cand = rng.uniform(lower, upper, size=(max(4 * need, 64), P.dim))
        ok = cand[contains_points(P, cand, tol=0.0)]
        pts.extend(ok[:need])
        need = n_samples - len(pts)
    if need > 0:
        x, _ = chebyshev_center(P)
        for _ in range(need):
            x = _hit_and_run_step(P, x, rng)
            pts.append(x.copy())
    return np.array(pts).reshape(n_samples, P.dim)


def _hit_and_run_step(P, x, rng):
    d = rng.normal(size=P.dim)
    d /= np.linalg.norm(d)
    Ad = P.A @ d
    slack = P.b - P.A @ x
    with np.errstate(divide="ignore", invalid="ignore"):
        t = slack / Ad
    hi = np.min(t[Ad > 1e-14], initial=0.0)
    lo = np.max(t[Ad < -1e-14], initial=0.0)
    return x + rng.uniform(lo, hi) * d
