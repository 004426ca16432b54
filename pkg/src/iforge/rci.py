"""Robust controlled invariant sets of ``x+ = A x + B u + w``.

``outer_approx`` and ``inner_approx`` run the set iteration ``R_{i+1} =
pre(R_i) & X`` with the two stopping rules of the outer and inner schemes.
``grid_oracle_maximal_rci`` is an independent brute-force fixed point on a
grid, kept deliberately free of any polytope machinery.
"""

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import polytope as pt
from .exceptions import (
    DimensionMismatch,
    EmptySet,
    IterationLimit,
    NumericalFailure,
    ResolutionTooCoarse,
    UnboundedDirection,
    UnsupportedDimension,
)
from .polytope import HPolytope

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITER = 500


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """Disturbed linear system with compact state and input constraints.

    Attributes
    ----------
    A, B : ndarray
        Dynamics ``x+ = A x + B u + w``.
    W : HPolytope
        Disturbance set.
    X, U : HPolytope
        Safe set and input set, both compact.
    """

    A: np.ndarray
    B: np.ndarray
    W: HPolytope
    X: HPolytope
    U: HPolytope
    _w_box: tuple = field(default=None, repr=False)
    _u_box: tuple = field(default=None, repr=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise DimensionMismatch(f"B has {B.shape[0]} rows, expected {n}")
        for name, P, d in (("W", self.W, n), ("X", self.X, n), ("U", self.U, B.shape[1])):
            if not isinstance(P, HPolytope):
                raise TypeError(f"{name} must be an HPolytope")
            if P.dim != d:
                raise DimensionMismatch(f"{name} has dimension {P.dim}, expected {d}")
            if pt.is_empty(P):
                raise EmptySet(f"{name} is empty")
            if not pt.is_bounded(P):
                raise UnboundedDirection(f"{name} must be bounded")
        A.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "_w_box", pt.box_bounds(self.W))
        object.__setattr__(self, "_u_box", pt.box_bounds(self.U))

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    def disturbance_support(self, directions):
        """Support of ``W`` for each row of ``directions``."""
        G = np.atleast_2d(directions)
        if self._w_box is not None:
            lo, hi = self._w_box
            return np.where(G > 0, G * hi, G * lo).sum(axis=1)
        return np.array([pt.support(self.W, g) for g in G])

    def step(self, x, u, w):
        return self.A @ x + self.B @ u + w


@dataclass
class RciResult:
    """Outcome of an outer or inner approximation run.

    ``accuracy`` is ``eps`` for the outer scheme and ``rho`` for the inner one.
    ``delta_hat`` is the largest violation of the safe-set rows by the
    returned set, zero whenever the set lies inside ``X``.
    """

    set: HPolytope
    mode: str
    accuracy: float
    iterations: int
    empty: bool
    history_sizes: list
    delta_hat: float = 0.0


def pre(sys, R, rho=0.0):
    """States that some input in ``U`` steers into ``R`` for every disturbance.

    With ``rho > 0`` the disturbance set is inflated to ``W + rho * B``.
    """
    if R.dim != sys.n:
        raise DimensionMismatch(f"target has dimension {R.dim}, system has {sys.n}")
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if pt.is_empty(R):
        return HPolytope.empty(sys.n)
    shift = sys.disturbance_support(R.A) + rho * np.abs(R.A).sum(axis=1)
    E = pt.erode_by_support(R, shift)
    if pt.is_empty(E):
        return HPolytope.empty(sys.n)
    if sys._u_box is not None:
        return _pre_box_input(sys, E)
    n, m = sys.n, sys.m
    lifted_A = np.vstack([
        np.hstack([E.A @ sys.A, E.A @ sys.B]),
        np.hstack([np.zeros((sys.U.n_rows, n)), sys.U.A]),
    ])
    lifted_b = np.concatenate([E.b, sys.U.b])
    Ar, br = pt._project_arrays(lifted_A, lifted_b, list(range(n)))
    if Ar is None:
        return HPolytope.empty(n)
    return HPolytope._raw(Ar, br, n, empty=False)


def _pre_box_input(sys, E):
    # A x + B u in E for some u in a box  <=>  A x in (E - B c) + sum of segments
    lo, hi = sys._u_box
    center, half = (lo + hi) / 2, (hi - lo) / 2
    S = E.translated(-sys.B @ center)
    for k in np.argsort(-half):
        if half[k] > 0:
            S = pt.minkowski_sum_segment(S, half[k] * sys.B[:, k])
    return pt.affine_preimage(S, sys.A)


def pre_rho(sys, R, rho):
    return pre(sys, R, rho)


def _constraint_violation(sys, S):
    if pt.is_empty(S):
        return 0.0
    worst = max(pt.support(S, g) - c for g, c in zip(sys.X.A, sys.X.b))
    return max(worst, 0.0)


def _iterate(sys, R, rho):
    return pt.intersect(pre(sys, R, rho), sys.X)


def outer_approx(sys, eps, max_iter=DEFAULT_MAX_ITER, check_descent=True):
    """Outer approximation of the maximal RCI set.

    Iterates from ``X`` and stops once ``R_i`` lies inside ``R_{i+n} + eps*B``;
    returns ``R_{i+n}``.  An empty iterate ends the run with ``empty=True``.

    Raises
    ------
    IterationLimit
        When ``max_iter`` iterations pass without meeting the stopping rule.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    n = sys.n
    R = pt.remove_redundancy(sys.X)
    window = deque([R], maxlen=n + 1)
    sizes = [R.n_rows]
    for it in range(1, max_iter + 1):
        nxt = _iterate(sys, R, 0.0)
        sizes.append(nxt.n_rows if not nxt.is_canonical_empty else 0)
        if pt.is_empty(nxt):
            return RciResult(HPolytope.empty(n), "outer", eps, it, True, sizes)
        if check_descent and not pt.contains_set(nxt, R):
            raise NumericalFailure(f"outer iterate {it} is not contained in its predecessor")
        window.append(nxt)
        R = nxt
        if len(window) == n + 1 and pt.contains_set(window[0], pt.minkowski_sum_ball(R, eps)):
            logger.debug("outer approximation converged after %d iterations", it)
            return RciResult(R, "outer", eps, it, False, sizes, _constraint_violation(sys, R))
    raise IterationLimit(max_iter)


def inner_approx(sys, rho, max_iter=DEFAULT_MAX_ITER):
    """Inner approximation: an RCI set computed against ``W + rho*B``.

    Stops once ``R_i`` lies inside ``R_{i+1} + rho*B`` and returns
    ``R_{i+1}``, which is then checked with :func:`verify_rci`.  Where the
    dilation used by the stopping test is only an outer bound (state dimension
    three and above) a candidate failing that check is skipped and the
    iteration continues.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    n = sys.n
    R = pt.remove_redundancy(sys.X)
    sizes = [R.n_rows]
    for it in range(1, max_iter + 1):
        nxt = _iterate(sys, R, rho)
        sizes.append(nxt.n_rows if not nxt.is_canonical_empty else 0)
        if pt.is_empty(nxt):
            return RciResult(HPolytope.empty(n), "inner", rho, it, True, sizes)
        stop = pt.contains_set(R, pt.minkowski_sum_ball(nxt, rho))
        R = nxt
        if stop:
            if verify_rci(sys, R):
                return RciResult(R, "inner", rho, it, False, sizes, 0.0)
            if n <= 2:
                raise NumericalFailure("inner approximation failed its invariance check")
            logger.info("inner candidate at iteration %d is not invariant, continuing", it)
    raise IterationLimit(max_iter)


def verify_rci(sys, omega):
    """``omega`` lies in ``X`` and in ``pre(omega)``."""
    if omega.dim != sys.n:
        raise DimensionMismatch(f"set has dimension {omega.dim}, system has {sys.n}")
    if pt.is_empty(omega):
        return True
    return pt.contains_set(omega, sys.X) and pt.contains_set(omega, pre(sys, omega))


# ---------------------------------------------------------------------------------
# brute-force grid oracle


def _grid_axes(P, resolution, what):
    lower, upper = pt.bounding_box(P)
    axes = []
    for lo, hi in zip(lower, upper):
        count = int(np.floor((hi - lo) / resolution + 1e-9)) + 1
        axes.append(lo + resolution * np.arange(count))
    return axes


def _mesh(axes):
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=1)


def grid_oracle_maximal_rci(sys, resolution, u_resolution=None, max_iter=10_000):
    """Surviving grid points of the discrete safety game over ``X``.

    A grid point survives when some gridded input sends it, under every vertex
    of ``W``, to a point whose nearest grid point survives and which lies in
    ``X``.  Returns the surviving points as an array of shape ``(k, n)``.
    """
    if sys.n > 2 or sys.m > 2:
        raise UnsupportedDimension("grid oracle supports n <= 2 and m <= 2")
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    u_resolution = resolution if u_resolution is None else u_resolution

    axes = _grid_axes(sys.X, resolution, "state")
    counts = np.array([a.size for a in axes])
    if np.any(counts < 10):
        raise ResolutionTooCoarse(f"grid has {counts.min()} cells on some axis, need at least 10")
    lower = np.array([a[0] for a in axes])
    points = _mesh(axes)
    in_x = pt.contains_points(sys.X, points)

    u_axes = _grid_axes(sys.U, u_resolution, "input")
    inputs = _mesh(u_axes)
    inputs = inputs[pt.contains_points(sys.U, inputs)]
    if inputs.size == 0:
        inputs = np.zeros((1, sys.m))[pt.contains_points(sys.U, np.zeros((1, sys.m)))]
    disturbances = pt.extreme_points(sys.W)

    strides = np.cumprod(np.concatenate([[1], counts[::-1][:-1]]))[::-1]
    base = points @ sys.A.T
    # successors, shape (cells, inputs, disturbances, n)
    succ = (base[:, None, None, :] + (inputs @ sys.B.T)[None, :, None, :]
            + disturbances[None, None, :, :])
    idx = np.rint((succ - lower) / resolution).astype(np.int64)
    inside = np.all((idx >= 0) & (idx < counts), axis=-1)
    inside &= pt.contains_points(sys.X, succ.reshape(-1, sys.n)).reshape(inside.shape)
    flat = np.where(inside, (np.clip(idx, 0, counts - 1) * strides).sum(axis=-1), 0)

    alive = in_x.copy()
    for _ in range(max_iter):
        ok = inside & alive[flat]
        new = alive & np.any(np.all(ok, axis=2), axis=1)
        if np.array_equal(new, alive):
            break
        alive = new
    else:
        raise IterationLimit(max_iter)
    return points[alive]
