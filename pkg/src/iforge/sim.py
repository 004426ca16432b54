"""Platoon models, closed-loop simulation and feasibility sweeps.

Two platoon models are provided.  The centralised one keeps every follower's
position and velocity relative to the leader in a single state vector; the
decentralised one gives each follower its own two-dimensional subsystem
``(d_i, v_i)`` coupled to its predecessor through ``eps_couple * v_{i-1}``.
"""

import csv
import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import lp
from . import polytope as pt
from .exceptions import Infeasible, IterationLimit, NumericalFailure, OutsideDomain, SynthesisInfeasible
from .network import InterconnectedSystem, Subsystem, composed_select, synthesize_all
from .polytope import HPolytope
from .rci import LinearSystem

logger = logging.getLogger(__name__)

W_READINGS = ("per-state", "velocity-only", "absolute")
INPUT_COORDS = ("physical", "relative")


@dataclass(frozen=True)
class PlatoonParamsCentral:
    """Centralised platoon: ``N`` followers tracked relative to the leader.

    Attributes
    ----------
    N : int
        Number of followers.
    l : float
        Vehicle length (m); also the minimum gap between consecutive vehicles.
    dt : float
        Sampling step (s).
    L : float
        Bound on the last follower's distance to the leader (m).
    v_min, v_max : float
        Leader speed bounds (m/s).
    u_bound : float
        Bound on every physical acceleration (m/s^2).
    lam : float
        Disturbance scale.
    eps_acc, rho_acc : float
        Accuracy of the outer and inner schemes.
    v_rel_bound : float
        Bound on relative velocities, needed to make the safe set compact.
    w_reading : {"per-state", "velocity-only", "absolute"}
        ``per-state`` puts ``lam*[-0.25, 0.25]`` on each relative distance and
        ``lam*[-1, 1]`` on each velocity; ``velocity-only`` drops the distance
        disturbances; ``absolute`` draws those boxes per vehicle, leader
        included, and maps them through the relative coordinates, so
        ``x_i`` sees ``w_{0,x} - w_{i,x}`` and ``v_i`` sees ``w_{0,v} - w_{i,v}``.
    input_coords : {"physical", "relative"}
        ``physical`` uses the accelerations ``(u_1, ..., u_N, u_0)`` with a box
        input set; ``relative`` uses ``(u~_1, ..., u~_N, u_0)`` with
        ``u~_i = u_0 - u_i``.  Both describe the same admissible motions.
    """

    N: int = 2
    l: float = 4.5
    dt: float = 0.5
    L: float = 10.0
    v_min: float = 13.0
    v_max: float = 17.0
    u_bound: float = 3.0
    lam: float = 0.23
    eps_acc: float = 0.01
    rho_acc: float = 0.01
    v_rel_bound: float = 10.0
    w_reading: str = "per-state"
    input_coords: str = "physical"

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        for name in ("l", "L", "u_bound", "eps_acc", "rho_acc", "v_rel_bound"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.dt < 0 or self.lam < 0:
            raise ValueError("dt and lam must be nonnegative")
        if not self.v_min < self.v_max:
            raise ValueError("v_min must be below v_max")
        if self.w_reading not in W_READINGS:
            raise ValueError(f"w_reading must be one of {W_READINGS}")
        if self.input_coords not in INPUT_COORDS:
            raise ValueError(f"input_coords must be one of {INPUT_COORDS}")


@dataclass(frozen=True)
class PlatoonParamsDecentral:
    """Decentralised platoon with per-follower spacing bound ``delta``.

    ``v_bar`` bounds each follower's velocity in the leader frame so that the
    local safe sets are compact.
    """

    N: int = 6
    l: float = 5.0
    delta: float = 0.5
    eps_couple: float = 0.1
    lam: float = 0.06
    u_bound: float = 1.0
    v_bar: float = 5.0
    eps_acc: float = 0.01
    rho_acc: float = 0.01

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        if not self.delta > 0.1:
            raise ValueError("delta must exceed the 0.1 m minimum distance")
        if self.l <= 0 or self.v_bar <= 0 or self.eps_acc <= 0 or self.rho_acc <= 0:
            raise ValueError("l, v_bar, eps_acc and rho_acc must be positive")
        if self.lam < 0 or self.eps_couple < 0 or self.u_bound < 0:
            raise ValueError("lam, eps_couple and u_bound must be nonnegative")

    @property
    def L(self):
        return self.N * (self.delta + self.l)

    @property
    def density(self):
        """Vehicles per kilometre."""
        return 1000.0 * self.N / self.L


def accuracy_for(params, mode):
    return params.eps_acc if mode == "outer" else params.rho_acc


def build_central_platoon(p):
    """Relative-coordinate platoon with state ``(x1, v1, ..., xN, vN, v0)``.

    ``x_i`` and ``v_i`` are the leader's position and velocity minus follower
    ``i``'s; the relative input is ``u~_i = u_0 - u_i``.
    """
    N, dt = p.N, p.dt
    n, m = 2 * N + 1, N + 1
    A = np.eye(n)
    B = np.zeros((n, m))  # columns (u~_1, ..., u~_N, u_0)
    for i in range(N):
        A[2 * i, 2 * i + 1] = dt
        B[2 * i, i] = dt ** 2 / 2
        B[2 * i + 1, i] = dt
    B[-1, -1] = dt

    rows, offs = [], []
    e = np.eye(n)
    # x1 >= l, x_{i+1} >= x_i + l, xN <= L
    rows.append(-e[0])
    offs.append(-p.l)
    for i in range(N - 1):
        rows.append(e[2 * i] - e[2 * i + 2])
        offs.append(-p.l)
    rows.append(e[2 * N - 2])
    offs.append(p.L)
    for i in range(N):
        rows += [e[2 * i + 1], -e[2 * i + 1]]
        offs += [p.v_rel_bound, p.v_rel_bound]
    rows += [e[-1], -e[-1]]
    offs += [p.v_max, -p.v_min]
    X = HPolytope(np.array(rows), np.array(offs))

    if p.input_coords == "physical":
        # u~ = T (u_1, ..., u_N, u_0)
        T = np.zeros((m, m))
        T[:N, :N] = -np.eye(N)
        T[:, -1] = 1.0
        B = B @ T
        U = HPolytope.box(np.full(m, -p.u_bound), np.full(m, p.u_bound))
    else:
        eu = np.eye(m)
        urows = [eu[-1], -eu[-1]]
        for i in range(N):
            urows += [eu[-1] - eu[i], eu[i] - eu[-1]]
        U = HPolytope(np.array(urows), np.full(len(urows), p.u_bound))

    if p.w_reading == "absolute":
        # absolute disturbances (w_{0,x}, w_{0,v}, ..., w_{N,x}, w_{N,v})
        E = np.zeros((n, 2 * N + 2))
        for i in range(N):
            E[2 * i, 0], E[2 * i, 2 * i + 2] = 1.0, -1.0
            E[2 * i + 1, 1], E[2 * i + 1, 2 * i + 3] = 1.0, -1.0
        E[-1, 1] = 1.0
        half = np.tile([0.25 * p.lam, p.lam], N + 1)
        W = pt.affine_image(HPolytope.box(-half, half), E) if p.lam > 0 else HPolytope.point(np.zeros(n))
    else:
        half = np.empty(n)
        half[0:2 * N:2] = 0.25 * p.lam if p.w_reading == "per-state" else 0.0
        half[1:2 * N:2] = p.lam
        half[-1] = p.lam
        W = HPolytope.box(-half, half)
    return LinearSystem(A, B, W, X, U)


def build_decentral_platoon(p):
    """Chain of followers ``(d_i, v_i)``; follower ``i`` reads ``v_{i-1}``.

    The first follower's predecessor is the leader, which sits at the origin
    of the leader frame, so it carries no coupling term.
    """
    A = [[1.0, -1.0], [0.0, 1.0]]
    B = [[0.0], [1.0]]
    D = [[0.0, p.eps_couple], [0.0, 0.0]]
    X = HPolytope.box([0.1, -p.v_bar], [p.delta, p.v_bar])
    U = HPolytope.box([-p.u_bound], [p.u_bound])
    W = HPolytope.box([-0.1 * p.lam, -2.0 * p.lam], [0.1 * p.lam, 2.0 * p.lam])
    coupled = p.eps_couple != 0
    subs = []
    for i in range(p.N):
        d_blocks = {i - 1: D} if coupled and i > 0 else {}
        out_blocks = {i + 1: np.eye(2)} if coupled and i < p.N - 1 else {}
        subs.append(Subsystem(A, B, X, U, W, d_blocks, out_blocks))
    return InterconnectedSystem(subs)


# ---------------------------------------------------------------------------------
# simulation


@dataclass
class Trajectory:
    """Closed-loop run of ``horizon`` steps.

    ``inputs`` and ``disturbances`` are padded with a trailing NaN row so every
    array has ``horizon + 1`` rows.  ``violation_flags[t, i]`` marks
    subsystem ``i`` outside its safe set at step ``t``; ``domain_flags[t]``
    marks a state outside the composed controller domain.
    """

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    disturbances: np.ndarray
    violation_flags: np.ndarray
    domain_flags: np.ndarray
    dims: list = field(default_factory=list)
    input_dims: list = field(default_factory=list)

    def __len__(self):
        return len(self.times)

    @property
    def n_violations(self):
        """Number of (step, subsystem) pairs outside the safe set."""
        return int(self.violation_flags.sum())

    def block(self, i, what="states"):
        arr = getattr(self, what)
        sizes = self.input_dims if what == "inputs" else self.dims
        start = int(sum(sizes[:i]))
        return arr[:, start:start + sizes[i]]


def _disturbance_sampler(W):
    box = pt.box_bounds(W)
    if box is not None:
        return lambda rng: rng.uniform(box[0], box[1])
    return lambda rng: pt.sample_points(W, 1, rng)[0]


def _fallback_input(composed, x):
    # keep going after a violation: least-norm input of each local input set
    us = []
    for c, xi in zip(composed.locals, composed.split(x)):
        try:
            us.append(c.select_input(xi))
        except OutsideDomain:
            us.append(lp.min_norm_point(c.sys.U.A, c.sys.U.b))
    return np.concatenate(us)


def simulate(net, composed, horizon, seed=0, x0=None):
    """Run the composed controller on the true coupled dynamics.

    Parameters
    ----------
    net : InterconnectedSystem
    composed : ComposedController
    horizon : int
        Number of steps.
    seed : int
        Seed of the disturbance generator.
    x0 : array_like, optional
        Initial state; defaults to the Chebyshev centers of the local domains.

    Raises
    ------
    OutsideDomain
        If ``x0`` is outside the composed domain.
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    rng = np.random.default_rng(seed)
    if x0 is None:
        x0 = np.concatenate([pt.chebyshev_center(c.omega)[0] for c in composed.locals])
    x = np.asarray(x0, dtype=float)
    if x.shape != (sum(net.dims),):
        raise ValueError(f"x0 must have shape ({sum(net.dims)},)")
    if not composed.in_domain(x):
        raise OutsideDomain(f"initial state {x} is outside the controller domain")

    n, m = sum(net.dims), sum(net.input_dims)
    states = np.empty((horizon + 1, n))
    inputs = np.full((horizon + 1, m), np.nan)
    dists = np.full((horizon + 1, n), np.nan)
    unsafe = np.zeros((horizon + 1, len(net)), dtype=bool)
    outside = np.zeros(horizon + 1, dtype=bool)
    Xs = [s.X for s in net.subsystems]
    samplers = [_disturbance_sampler(s.W) for s in net.subsystems]
    for t in range(horizon + 1):
        states[t] = x
        blocks = net.split(x)
        unsafe[t] = [not pt.contains_point(X, xi) for X, xi in zip(Xs, blocks)]
        outside[t] = not composed.in_domain(x)
        if t == horizon:
            break
        try:
            u = composed_select(composed, x)
        except OutsideDomain:
            u = _fallback_input(composed, x)
        w = np.concatenate([draw(rng) for draw in samplers])
        inputs[t], dists[t] = u, w
        x = net.step(x, u, w)
    return Trajectory(np.arange(horizon + 1), states, inputs, dists, unsafe, outside,
                      list(net.dims), list(net.input_dims))


def _fmt(v):
    return "" if np.isnan(v) else repr(float(v))


def write_trajectory_csv(traj, path):
    """One row per time step and subsystem.

    Two-state, one-input subsystems use ``t,sub,d,v,u,w_d,w_v,violation``;
    other shapes get numbered ``x``, ``u`` and ``w`` columns.
    """
    platoon = all(d == 2 for d in traj.dims) and all(k == 1 for k in traj.input_dims)
    if platoon:
        header = ["t", "sub", "d", "v", "u", "w_d", "w_v", "violation"]
    else:
        nx, nu = max(traj.dims), max(traj.input_dims)
        header = (["t", "sub"] + [f"x{k}" for k in range(nx)] + [f"u{k}" for k in range(nu)]
                  + [f"w{k}" for k in range(nx)] + ["violation"])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t in range(len(traj)):
            for i in range(len(traj.dims)):
                xs = traj.block(i)[t]
                us = traj.block(i, "inputs")[t]
                ws = traj.block(i, "disturbances")[t]
                bad = int(traj.violation_flags[t, i])
                if not platoon:
                    pad = max(traj.dims) - len(xs)
                    xs = np.concatenate([xs, np.full(pad, np.nan)])
                    ws = np.concatenate([ws, np.full(pad, np.nan)])
                    us = np.concatenate([us, np.full(max(traj.input_dims) - len(us), np.nan)])
                row = [int(traj.times[t]), i] + [_fmt(v) for v in xs]
                row += [_fmt(v) for v in us] + [_fmt(v) for v in ws] + [bad]
                writer.writerow(row)


# ---------------------------------------------------------------------------------
# sweeps


def _is_feasible(builder, params, mode, refine):
    net = builder(params)
    try:
        synthesize_all(net, mode, accuracy_for(params, mode), refine=refine)
    except (SynthesisInfeasible, IterationLimit):
        return False
    return True


def _feasible_job(args):
    return _is_feasible(*args)


def _largest_feasible(builder, base, name, mode, grid_step, upper, refine, jobs, lower=0.0):
    """Largest grid value of ``name`` keeping every local synthesis feasible.

    Searches the grid ``lower, lower + step, ..., upper`` by k-section
    (bisection when ``jobs == 1``), then checks that no evaluated infeasible
    point lies below an evaluated feasible one.
    """
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    if not 0 <= lower < upper:
        raise ValueError("need 0 <= lower < upper")
    k0 = int(np.ceil(lower / grid_step - 1e-9))
    n_steps = int(np.floor(upper / grid_step + 1e-9))
    seen = {}

    def value(k):
        return round(k * grid_step, 12)

    def evaluate(ks):
        todo = [k for k in ks if k not in seen]
        args = [(builder, dataclasses.replace(base, **{name: value(k)}), mode, refine)
                for k in todo]
        if jobs > 1 and len(args) > 1:
            with ProcessPoolExecutor(max_workers=min(jobs, len(args))) as pool:
                results = list(pool.map(_feasible_job, args))
        else:
            results = [_feasible_job(a) for a in args]
        seen.update(zip(todo, results))

    evaluate([k0, n_steps])
    if not seen[k0]:
        raise Infeasible(f"infeasible at {name} = {value(k0)}")
    lo, hi = k0, n_steps
    if not seen[n_steps]:
        while hi - lo > 1:
            k = max(1, jobs)
            probes = sorted({lo + (hi - lo) * (j + 1) // (k + 1) for j in range(k)} - {lo, hi})
            evaluate(probes)
            for p in probes:
                if seen[p]:
                    lo = max(lo, p)
            hi = min([p for p in probes if not seen[p] and p > lo] + [hi])
    else:
        lo = n_steps
    feas = [k for k, ok in seen.items() if ok]
    infeas = [k for k, ok in seen.items() if not ok]
    if infeas and feas and min(infeas) < max(feas):
        raise NumericalFailure(f"feasibility in {name} is not monotone on the grid")
    return value(lo)


def sweep_lambda(builder, mode, density_point, grid_step=0.01, upper=1.0, refine=True, jobs=1,
                 lower=0.0):
    """Largest disturbance scale ``lam`` on the grid with a feasible synthesis.

    Parameters
    ----------
    builder : callable
        Maps a parameter object (e.g. :class:`PlatoonParamsDecentral`) to an
        :class:`InterconnectedSystem`.
    mode : {"outer", "inner"}
    density_point : PlatoonParamsDecentral
        Base parameters; ``lam`` is overwritten.
    grid_step : float
    upper : float
        Grid maximum, returned when everything is feasible.
    lower : float
        Grid minimum; the search needs it to be feasible.
    refine : bool
        Let each follower assume its predecessor stays in the predecessor's
        synthesised set.
    jobs : int

    Raises
    ------
    Infeasible
        If the synthesis fails at ``lower``.
    """
    return _largest_feasible(builder, density_point, "lam", mode, grid_step, upper, refine, jobs,
                             lower)


def sweep_epsilon(builder, mode, density_point, grid_step=0.01, upper=2.0, refine=True, jobs=1,
                  lower=0.0):
    """Largest coupling ``eps_couple`` on the grid with ``lam = 0``."""
    base = dataclasses.replace(density_point, lam=0.0)
    return _largest_feasible(builder, base, "eps_couple", mode, grid_step, upper, refine, jobs,
                             lower)


@dataclass(frozen=True)
class SweepRow:
    delta: float
    density: float
    mode: str
    lambda_star: float
    eps_star: float


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)

    def get(self, delta, mode):
        for r in self.rows:
            if r.delta == delta and r.mode == mode:
                return r
        raise KeyError((delta, mode))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["delta", "rho_density", "mode", "lambda_star", "eps_star"])
            for r in self.rows:
                writer.writerow([repr(r.delta), repr(r.density), r.mode,
                                 _fmt(r.lambda_star), _fmt(r.eps_star)])


def table1(builder=build_decentral_platoon, deltas=(0.5, 3.0, 12.0), modes=("outer", "inner"),
           base=None, grid_step=0.01, refine=True, jobs=1, parameters=("lambda", "epsilon"),
           bounds=None):
    """``lam*`` and ``eps*`` for every spacing bound and mode.

    ``lam*`` is searched with ``base.eps_couple``; ``eps*`` with ``lam = 0``.
    A sweep infeasible at its lower end is recorded as NaN, and so is a
    parameter left out of ``parameters``. ``bounds`` maps a parameter name
    to a ``(lower, upper)`` grid range.
    """
    bounds = dict(bounds or {})
    base = PlatoonParamsDecentral() if base is None else base
    result = SweepResult()
    for delta in deltas:
        point = dataclasses.replace(base, delta=float(delta))
        for mode in modes:
            stars = []
            for name, sweep, top in (("lambda", sweep_lambda, 1.0), ("epsilon", sweep_epsilon, 2.0)):
                if name not in parameters:
                    stars.append(float("nan"))
                    continue
                lower, upper = bounds.get(name, (0.0, top))
                try:
                    stars.append(sweep(builder, mode, point, grid_step, upper, refine, jobs, lower))
                except Infeasible:
                    stars.append(float("nan"))
            logger.info("delta=%g mode=%s lam*=%s eps*=%s", delta, mode, *stars)
            result.rows.append(SweepRow(float(delta), point.density, mode, *stars))
    return result
