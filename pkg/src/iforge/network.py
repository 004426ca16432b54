"""Interconnected systems, assume-guarantee synthesis and controller composition.

Subsystem ``i`` evolves as

    x_i+ = A_i x_i + B_i u_i + sum_j D_ij z_ij + w_i,     z_ij = H_ji x_j,

where ``D_ij`` is ``Subsystem.D_blocks[j]`` on subsystem ``i`` and ``H_ji`` is
``Subsystem.out_blocks[i]`` on subsystem ``j``.  Local synthesis treats the
coupling as extra disturbance, assuming every neighbour stays in its own set.
"""

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import polytope as pt
from .controller import SafetyController, synthesize
from .exceptions import DimensionMismatch, IterationLimit, OutsideDomain, SynthesisInfeasible
from .polytope import HPolytope
from .rci import DEFAULT_MAX_ITER, LinearSystem

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class Subsystem:
    A: np.ndarray
    B: np.ndarray
    X: HPolytope
    U: HPolytope
    W: HPolytope
    D_blocks: dict = field(default_factory=dict)
    out_blocks: dict = field(default_factory=dict)

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.asarray(self.B, dtype=float)
        if self.B.ndim == 1:
            self.B = self.B.reshape(-1, 1)
        n = self.A.shape[0]
        if self.A.shape != (n, n) or self.B.shape[0] != n:
            raise DimensionMismatch("A must be square and B must have as many rows as A")
        for name, P, d in (("X", self.X, n), ("W", self.W, n), ("U", self.U, self.B.shape[1])):
            if P.dim != d:
                raise DimensionMismatch(f"{name} has dimension {P.dim}, expected {d}")
        self.D_blocks = {int(j): np.atleast_2d(np.asarray(D, dtype=float))
                         for j, D in self.D_blocks.items()}
        self.out_blocks = {int(j): np.atleast_2d(np.asarray(H, dtype=float))
                           for j, H in self.out_blocks.items()}
        for j, D in self.D_blocks.items():
            if D.shape[0] != n:
                raise DimensionMismatch(f"D_blocks[{j}] has {D.shape[0]} rows, expected {n}")
        for j, H in self.out_blocks.items():
            if H.shape[1] != n:
                raise DimensionMismatch(f"out_blocks[{j}] has {H.shape[1]} columns, expected {n}")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]


class InterconnectedSystem:
    """Ordered collection of subsystems coupled through ``z_ij = y_ji``."""

    def __init__(self, subsystems):
        self.subsystems = list(subsystems)
        N = len(self.subsystems)
        if N == 0:
            raise ValueError("an interconnected system needs at least one subsystem")
        for i, sub in enumerate(self.subsystems):
            for j, D in sub.D_blocks.items():
                if not 0 <= j < N or j == i:
                    raise DimensionMismatch(f"subsystem {i} couples to invalid neighbour {j}")
                H = self.subsystems[j].out_blocks.get(i)
                if H is not None and H.shape[0] != D.shape[1]:
                    raise DimensionMismatch(
                        f"z_{i}{j} has dimension {D.shape[1]} but y_{j}{i} has {H.shape[0]}")

    def __len__(self):
        return len(self.subsystems)

    @property
    def dims(self):
        return [s.n for s in self.subsystems]

    @property
    def input_dims(self):
        return [s.m for s in self.subsystems]

    def coupling(self, i, j):
        """State-to-state coupling matrix ``D_ij @ H_ji`` or ``None``."""
        D = self.subsystems[i].D_blocks.get(j)
        H = self.subsystems[j].out_blocks.get(i)
        if D is None or H is None:
            return None
        return D @ H

    def neighbours(self, i):
        return [j for j in sorted(self.subsystems[i].D_blocks) if self.coupling(i, j) is not None]

    def levels(self):
        """Subsystems grouped so each depends only on earlier groups.

        Returns ``None`` when the coupling graph has a cycle.
        """
        remaining = set(range(len(self)))
        done, out = set(), []
        while remaining:
            ready = sorted(i for i in remaining if set(self.neighbours(i)) <= done)
            if not ready:
                return None
            out.append(ready)
            done.update(ready)
            remaining.difference_update(ready)
        return out

    def split(self, x, dims=None):
        dims = self.dims if dims is None else dims
        x = np.asarray(x, dtype=float)
        return np.split(x, np.cumsum(dims)[:-1])

    def step(self, x, u, w):
        """True interconnected dynamics with ``z_ij = H_ji x_j`` substituted."""
        xs = self.split(x)
        us = self.split(u, self.input_dims)
        ws = self.split(w)
        out = []
        for i, sub in enumerate(self.subsystems):
            nxt = sub.A @ xs[i] + sub.B @ us[i] + ws[i]
            for j in self.neighbours(i):
                nxt = nxt + self.coupling(i, j) @ xs[j]
            out.append(nxt)
        return np.concatenate(out)


def lift_disturbance(net, i, assumptions=None):
    """``W_i`` plus the coupling terms over the assumed neighbour sets.

    ``assumptions`` maps a neighbour index to the set it is assumed to stay in
    (a list indexed by subsystem or a dict); missing entries default to the
    neighbour's safe set.
    """
    sub = net.subsystems[i]
    W = sub.W
    for j in net.neighbours(i):
        K = net.coupling(i, j)
        assumed = _assumption(net, assumptions, j)
        if assumed.dim != K.shape[1]:
            raise DimensionMismatch(f"assumption for subsystem {j} has dimension {assumed.dim}")
        W = pt.minkowski_sum(W, pt.affine_image(assumed, K))
    return W


def _assumption(net, assumptions, j):
    if assumptions is None:
        return net.subsystems[j].X
    if isinstance(assumptions, dict):
        got = assumptions.get(j)
    else:
        got = assumptions[j] if j < len(assumptions) else None
    return net.subsystems[j].X if got is None else got


def local_system(net, i, assumptions=None):
    sub = net.subsystems[i]
    return LinearSystem(sub.A, sub.B, lift_disturbance(net, i, assumptions), sub.X, sub.U)


def synthesize_local(net, i, mode="inner", accuracy=0.01, assumptions=None,
                     max_iter=DEFAULT_MAX_ITER):
    """Safety controller for subsystem ``i`` with coupling treated as disturbance.

    Raises
    ------
    SynthesisInfeasible
        If the local RCI set is empty.
    """
    sys = local_system(net, i, assumptions)
    ctrl, _ = synthesize(sys, mode, accuracy, max_iter)
    if ctrl is None:
        raise SynthesisInfeasible(i)
    return ctrl


def _synthesize_job(args):
    net, i, mode, accuracy, assumptions, max_iter = args
    return synthesize_local(net, i, mode, accuracy, assumptions, max_iter)


def synthesize_all(net, mode="inner", accuracy=0.01, assumptions=None,
                   max_iter=DEFAULT_MAX_ITER, refine=False, jobs=1):
    """Local controllers for every subsystem.

    With ``refine=True`` each subsystem assumes its neighbours stay in their
    synthesised sets rather than their safe sets.  On an acyclic coupling graph
    the subsystems are processed level by level, so every neighbour set is
    known before it is needed.  A cyclic graph falls back to the plain
    assumptions, since a neighbour's set is then not fixed when it is assumed.
    """
    levels = net.levels() if refine else None
    if refine and levels is None:
        logger.warning("coupling graph is cyclic, refinement skipped")
    if levels is not None:
        base = _assumption_dict(net, assumptions)
        ctrls = [None] * len(net)
        for level in levels:
            current = dict(base)
            current.update({j: ctrls[j].omega for j in range(len(net)) if ctrls[j] is not None})
            for i, c in zip(level, _run_jobs(net, level, mode, accuracy, current, max_iter, jobs)):
                ctrls[i] = c
        return ctrls
    return _run_jobs(net, range(len(net)), mode, accuracy, assumptions, max_iter, jobs)


def _assumption_dict(net, assumptions):
    if assumptions is None:
        return {}
    if isinstance(assumptions, dict):
        return dict(assumptions)
    return {j: a for j, a in enumerate(assumptions) if a is not None}


def _run_jobs(net, indices, mode, accuracy, assumptions, max_iter, jobs):
    args = [(net, i, mode, accuracy, assumptions, max_iter) for i in indices]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(args))) as pool:
            return list(pool.map(_synthesize_job, args))
    return [_synthesize_job(a) for a in args]


@dataclass
class ComposedController:
    """Product of local controllers: ``C(x) = {u : u_i in C_i(x_i) for all i}``."""

    locals: list
    mode: str

    @property
    def dims(self):
        return [c.sys.n for c in self.locals]

    @property
    def input_dims(self):
        return [c.sys.m for c in self.locals]

    @property
    def accuracy(self):
        """Infinity norm of the local accuracies."""
        return max((c.accuracy or 0.0) for c in self.locals)

    @property
    def delta_hat(self):
        return max(c.delta_hat for c in self.locals)

    def split(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (sum(self.dims),):
            raise DimensionMismatch(f"state must have shape ({sum(self.dims)},)")
        return np.split(x, np.cumsum(self.dims)[:-1])

    def admissible_inputs(self, x):
        """Per-block admissible input polytopes (empty blocks make ``C(x)`` empty)."""
        xs = self.split(x)
        if not self.in_domain(x):
            return [HPolytope.empty(c.sys.m) for c in self.locals]
        return [c.admissible_inputs(xi) for c, xi in zip(self.locals, xs)]

    def is_admissible_empty(self, x):
        return any(pt.is_empty(P) for P in self.admissible_inputs(x))

    def in_domain(self, x):
        xs = self.split(x)
        return all(c.in_domain(xi) for c, xi in zip(self.locals, xs))

    def select(self, x):
        return composed_select(self, x)


def compose(controllers):
    controllers = list(controllers)
    if not controllers:
        raise ValueError("nothing to compose")
    modes = {c.mode for c in controllers}
    if len(modes) != 1:
        raise ValueError(f"controllers have mixed modes {sorted(modes)}")
    return ComposedController(controllers, modes.pop())


def composed_select(composed, x):
    """Blockwise least-norm inputs, concatenated."""
    xs = composed.split(x)
    us = []
    for i, (c, xi) in enumerate(zip(composed.locals, xs)):
        if not c.in_domain(xi):
            raise OutsideDomain(f"block {i} state {xi} is outside its controller domain")
        try:
            us.append(c.select_input(xi))
        except OutsideDomain as exc:
            raise OutsideDomain(f"block {i}: {exc}") from exc
    return np.concatenate(us)


def deflate(P, eps):
    """``{x in P : x + eps*B inside P}``."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if eps == 0:
        return P
    return pt.pontryagin_diff(P, HPolytope.unit_ball(P.dim).scaled(eps))


def assemble_monolithic(net):
    """Centralised system with couplings placed off the block diagonal."""
    dims = net.dims
    offs = np.concatenate([[0], np.cumsum(dims)])
    A = block_diag(*[s.A for s in net.subsystems])
    for i in range(len(net)):
        for j in net.neighbours(i):
            A[offs[i]:offs[i + 1], offs[j]:offs[j + 1]] += net.coupling(i, j)
    B = block_diag(*[s.B for s in net.subsystems])
    X = pt.product(s.X for s in net.subsystems)
    U = pt.product(s.U for s in net.subsystems)
    W = pt.product(s.W for s in net.subsystems)
    return LinearSystem(A, B, W, X, U)


@dataclass
class SafetyReport:
    n_samples: int
    n_combos: int
    n_checks: int
    violations: int
    safe_set_violations: int
    max_relaxation: float

    @property
    def ok(self):
        return self.violations == 0


def check_composed_safety(net, composed, n_samples=500, seed=0, max_combos=256):
    """Sampled check that successors stay in the composed domain.

    States are drawn from each local domain, inputs come from
    :func:`composed_select`, and the true coupled dynamics are stepped under
    combinations of disturbance vertices (a seeded random subset when there are
    more than ``max_combos``).
    """
    rng = np.random.default_rng(seed)
    blocks = [pt.sample_points(c.omega, n_samples, rng) for c in composed.locals]
    states = np.hstack(blocks)
    # always include the block Chebyshev centers
    centers = np.concatenate([pt.chebyshev_center(c.omega)[0] for c in composed.locals])
    states = np.vstack([centers, states])

    vertex_sets = [pt.extreme_points(s.W) for s in net.subsystems]
    total = int(np.prod([len(v) for v in vertex_sets], dtype=float))
    if total <= max_combos:
        combos = [np.concatenate(c) for c in itertools.product(*vertex_sets)]
    else:
        combos = []
        for _ in range(max_combos):
            combos.append(np.concatenate([v[rng.integers(len(v))] for v in vertex_sets]))
    combos = np.array(combos)

    mono = assemble_monolithic(net)
    before = [len(c.relaxations) for c in composed.locals]
    violations = 0
    safe_violations = 0
    offs = np.concatenate([[0], np.cumsum(composed.dims)])
    for x in states:
        u = composed_select(composed, x)
        succ = (mono.A @ x + mono.B @ u)[None, :] + combos
        bad = np.zeros(len(combos), dtype=bool)
        unsafe = np.zeros(len(combos), dtype=bool)
        for i, c in enumerate(composed.locals):
            block = succ[:, offs[i]:offs[i + 1]]
            bad |= ~pt.contains_points(c.omega, block)
            unsafe |= ~pt.contains_points(net.subsystems[i].X, block)
        violations += int(bad.sum())
        safe_violations += int(unsafe.sum())
    relax = [t for c, k in zip(composed.locals, before) for t in c.relaxations[k:]]
    return SafetyReport(len(states), len(combos), len(states) * len(combos), violations,
                        safe_violations, max(relax, default=0.0))


class DecentralizedController(BaseEstimator):
    """Estimator-style compositional synthesis over an :class:`InterconnectedSystem`.

    ``fit(net)`` synthesises one local controller per subsystem and composes
    them; ``predict(states)`` returns stacked least-norm inputs.
    """

    def __init__(self, mode="inner", accuracy=0.01, max_iter=DEFAULT_MAX_ITER,
                 refine=False, jobs=1):
        self.mode = mode
        self.accuracy = accuracy
        self.max_iter = max_iter
        self.refine = refine
        self.jobs = jobs

    def fit(self, net, y=None):
        if not isinstance(net, InterconnectedSystem):
            raise TypeError("fit expects an InterconnectedSystem")
        ctrls = synthesize_all(net, self.mode, self.accuracy, None, self.max_iter,
                               self.refine, self.jobs)
        self.controllers_ = ctrls
        self.composed_ = compose(ctrls)
        self.net_ = net
        self.n_features_in_ = sum(net.dims)
        return self

    def predict(self, states):
        check_is_fitted(self, "composed_")
        states = check_array(states)
        if states.shape[1] != self.n_features_in_:
            raise DimensionMismatch(f"states must have {self.n_features_in_} columns")
        return np.array([composed_select(self.composed_, x) for x in states])

    def in_domain(self, states):
        check_is_fitted(self, "composed_")
        states = check_array(states)
        return np.array([self.composed_.in_domain(x) for x in states])

    def check_safety(self, n_samples=500, seed=0):
        check_is_fitted(self, "composed_")
        return check_composed_safety(self.net_, self.composed_, n_samples, seed)


def feasible(net, mode, accuracy, assumptions=None, max_iter=DEFAULT_MAX_ITER, refine=False):
    """True iff every local synthesis succeeds (an iteration limit counts as failure)."""
    try:
        synthesize_all(net, mode, accuracy, assumptions, max_iter, refine)
    except (SynthesisInfeasible, IterationLimit):
        return False
    return True
