"""JSON spec files, set files and controller files.

Polytope literals take one of three forms::

    {"normals": [[...], ...], "offsets": [...]}
    {"box": [[lo, hi], ...]}
    {"empty": true, "dim": n}

Floats are written with Python's shortest round-trip representation, so a
value read back is bit-identical to the one written.
"""

import json
import math

import numpy as np

from .controller import MODES, SafetyController
from .exceptions import DimensionMismatch, SpecError
from .network import ComposedController, InterconnectedSystem, Subsystem
from .polytope import HPolytope
from .rci import DEFAULT_MAX_ITER, LinearSystem
from .sim import PlatoonParamsCentral, PlatoonParamsDecentral, build_central_platoon, build_decentral_platoon

SWEEP_PARAMETERS = ("lambda", "epsilon", "table1")


# ---------------------------------------------------------------------------------
# literals


def _matrix(value, what, cols=None):
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SpecError(f"{what} is not a numeric matrix") from exc
    if M.ndim == 1 and cols is not None and M.size == 0:
        M = M.reshape(0, cols)
    if M.ndim != 2:
        raise SpecError(f"{what} must be a rectangular matrix")
    if not np.all(np.isfinite(M)):
        raise SpecError(f"{what} has non-finite entries")
    return M


def _vector(value, what):
    try:
        v = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SpecError(f"{what} is not a numeric vector") from exc
    if v.ndim != 1:
        raise SpecError(f"{what} must be a vector")
    return v


def polytope_from_dict(d, what="polytope"):
    if not isinstance(d, dict):
        raise SpecError(f"{what} must be an object")
    if d.get("empty"):
        if "dim" not in d:
            raise SpecError(f"{what}: an empty literal needs 'dim'")
        return HPolytope.empty(int(d["dim"]))
    if "box" in d:
        bounds = _matrix(d["box"], f"{what}.box")
        if bounds.shape[1] != 2:
            raise SpecError(f"{what}.box rows must be [lo, hi] pairs")
        return HPolytope.box(bounds[:, 0], bounds[:, 1])
    if "normals" in d and "offsets" in d:
        dim = d.get("dim")
        A = _matrix(d["normals"], f"{what}.normals", cols=dim)
        b = _vector(d["offsets"], f"{what}.offsets")
        if A.shape[0] != b.size:
            raise SpecError(f"{what}: {A.shape[0]} normals but {b.size} offsets")
        try:
            return HPolytope(A, b, dim=dim)
        except (ValueError, DimensionMismatch) as exc:
            raise SpecError(f"{what}: {exc}") from exc
    raise SpecError(f"{what} needs 'normals'/'offsets', 'box' or 'empty'")


def polytope_to_dict(P):
    if P.is_canonical_empty:
        return {"empty": True, "dim": P.dim}
    return {"dim": P.dim, "normals": P.A.tolist(), "offsets": P.b.tolist()}


def _check_float(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON ({exc})") from exc


# ---------------------------------------------------------------------------------
# spec files


def _linear_system(d):
    for key in ("A", "B", "W", "X", "U"):
        if key not in d:
            raise SpecError(f"monolithic system lacks '{key}'")
    A = _matrix(d["A"], "A")
    B = _matrix(d["B"], "B")
    sets = {k: polytope_from_dict(d[k], k) for k in ("W", "X", "U")}
    try:
        return LinearSystem(A, B, **sets)
    except (ValueError, DimensionMismatch) as exc:
        raise SpecError(str(exc)) from exc


def _network(d):
    subs = d.get("subsystems")
    if not isinstance(subs, list) or not subs:
        raise SpecError("network needs a nonempty 'subsystems' list")
    N = len(subs)
    blocks = [({}, {}) for _ in range(N)]
    for k, c in enumerate(d.get("couplings", [])):
        try:
            i, j = int(c["to"]), int(c["from"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecError(f"coupling {k} needs integer 'to' and 'from'") from exc
        if not (0 <= i < N and 0 <= j < N) or i == j:
            raise SpecError(f"coupling {k} references subsystems {i} <- {j} out of range")
        D = _matrix(c["D"], f"couplings[{k}].D")
        H = _matrix(c.get("H", np.eye(D.shape[1]).tolist()), f"couplings[{k}].H")
        blocks[i][0][j] = D
        blocks[j][1][i] = H
    out = []
    for k, s in enumerate(subs):
        for key in ("A", "B", "W", "X", "U"):
            if key not in s:
                raise SpecError(f"subsystem {k} lacks '{key}'")
        try:
            out.append(Subsystem(_matrix(s["A"], f"subsystems[{k}].A"),
                                 _matrix(s["B"], f"subsystems[{k}].B"),
                                 polytope_from_dict(s["X"], f"subsystems[{k}].X"),
                                 polytope_from_dict(s["U"], f"subsystems[{k}].U"),
                                 polytope_from_dict(s["W"], f"subsystems[{k}].W"),
                                 *blocks[k]))
        except (ValueError, DimensionMismatch) as exc:
            if isinstance(exc, SpecError):
                raise
            raise SpecError(f"subsystem {k}: {exc}") from exc
    try:
        return InterconnectedSystem(out)
    except (ValueError, DimensionMismatch) as exc:
        raise SpecError(str(exc)) from exc


def _platoon_params(d):
    d = dict(d)
    model = d.pop("model", "decentral")
    cls = {"central": PlatoonParamsCentral, "decentral": PlatoonParamsDecentral}.get(model)
    if cls is None:
        raise SpecError(f"unknown platoon model {model!r}")
    try:
        return cls(**d)
    except TypeError as exc:
        raise SpecError(f"platoon: {exc}") from exc
    except ValueError as exc:
        raise SpecError(f"platoon: {exc}") from exc


class Spec:
    """Validated spec file.

    Attributes
    ----------
    kind : {"monolithic", "network"}
    system : LinearSystem or InterconnectedSystem
    platoon : PlatoonParamsCentral or PlatoonParamsDecentral or None
        Set when the system came from a platoon shorthand.
    synthesis, simulation, sweep : dict
    """

    def __init__(self, kind, system, platoon, synthesis, simulation, sweep):
        self.kind = kind
        self.system = system
        self.platoon = platoon
        self.synthesis = synthesis
        self.simulation = simulation
        self.sweep = sweep

    def accuracy(self, mode):
        return self.synthesis["epsilon"] if mode == "outer" else self.synthesis["rho"]


def _synthesis_section(d, platoon):
    d = dict(d or {})
    default_eps = getattr(platoon, "eps_acc", 0.01)
    default_rho = getattr(platoon, "rho_acc", 0.01)
    out = {"mode": d.pop("mode", "inner"), "epsilon": float(d.pop("epsilon", default_eps)),
           "rho": float(d.pop("rho", default_rho)),
           "max_iter": int(d.pop("max_iter", DEFAULT_MAX_ITER)),
           "refine": bool(d.pop("refine", False))}
    if d:
        raise SpecError(f"unknown synthesis keys {sorted(d)}")
    if out["mode"] not in ("outer", "inner"):
        raise SpecError("synthesis.mode must be 'outer' or 'inner'")
    if out["epsilon"] <= 0 or out["rho"] <= 0 or out["max_iter"] < 1:
        raise SpecError("epsilon, rho and max_iter must be positive")
    return out


def _simulation_section(d, n):
    d = dict(d or {})
    out = {"horizon": int(d.pop("horizon", 60)), "seed": int(d.pop("seed", 0)), "x0": d.pop("x0", None)}
    if d:
        raise SpecError(f"unknown simulation keys {sorted(d)}")
    if out["horizon"] < 0:
        raise SpecError("simulation.horizon must be nonnegative")
    if out["x0"] is not None:
        x0 = _vector(out["x0"], "simulation.x0")
        if n is not None and x0.size != n:
            raise SpecError(f"simulation.x0 has {x0.size} entries, the state has {n}")
        out["x0"] = x0
    return out


def _sweep_section(d):
    d = dict(d or {})
    out = {"parameter": d.pop("parameter", "table1"), "grid_step": float(d.pop("grid_step", 0.01)),
           "range": d.pop("range", None), "deltas": d.pop("deltas", [0.5, 3.0, 12.0]),
           "modes": d.pop("modes", ["outer", "inner"]), "refine": bool(d.pop("refine", True))}
    if d:
        raise SpecError(f"unknown sweep keys {sorted(d)}")
    if out["parameter"] not in SWEEP_PARAMETERS:
        raise SpecError(f"sweep.parameter must be one of {SWEEP_PARAMETERS}")
    if out["grid_step"] <= 0:
        raise SpecError("sweep.grid_step must be positive")
    if out["range"] is not None:
        r = _vector(out["range"], "sweep.range")
        if r.size != 2 or not 0 <= r[0] < r[1]:
            raise SpecError("sweep.range must be [lo, hi] with 0 <= lo < hi")
        out["range"] = r.tolist()
    if any(m not in ("outer", "inner") for m in out["modes"]):
        raise SpecError("sweep.modes entries must be 'outer' or 'inner'")
    out["deltas"] = [float(x) for x in out["deltas"]]
    return out


def parse_spec(d):
    """Validate a spec dictionary and build its system."""
    if not isinstance(d, dict) or "system" not in d:
        raise SpecError("spec needs a 'system' section")
    unknown = set(d) - {"system", "synthesis", "simulation", "sweep"}
    if unknown:
        raise SpecError(f"unknown top-level keys {sorted(unknown)}")
    sysd = d["system"]
    if not isinstance(sysd, dict) or len(sysd) != 1:
        raise SpecError("system must have exactly one of 'monolithic', 'network', 'platoon'")
    (kind, body), = sysd.items()
    platoon = None
    if kind == "monolithic":
        system = _linear_system(body)
    elif kind == "network":
        system = _network(body)
    elif kind == "platoon":
        platoon = _platoon_params(body)
        if isinstance(platoon, PlatoonParamsCentral):
            kind, system = "monolithic", build_central_platoon(platoon)
        else:
            kind, system = "network", build_decentral_platoon(platoon)
    else:
        raise SpecError(f"unknown system kind {kind!r}")
    n = system.n if kind == "monolithic" else sum(system.dims)
    return Spec(kind, system, platoon, _synthesis_section(d.get("synthesis"), platoon),
                _simulation_section(d.get("simulation"), n), _sweep_section(d.get("sweep")))


def load_spec(path):
    return parse_spec(load_json(path))


# ---------------------------------------------------------------------------------
# results


def write_set_file(path, P, report=None):
    out = {"kind": "set", "set": polytope_to_dict(P)}
    if report is not None:
        out["report"] = report
    dump_json(out, path)


def read_set_file(path):
    """Polytope stored by :func:`write_set_file` (or a bare polytope literal)."""
    d = load_json(path)
    if isinstance(d, dict) and d.get("kind") == "set":
        return polytope_from_dict(d["set"], "set")
    if isinstance(d, dict) and d.get("kind") == "controller":
        raise SpecError(f"{path} holds a controller; project one of its sets instead")
    return polytope_from_dict(d, "set")


def controller_to_dict(composed, report=None):
    out = {"kind": "controller", "mode": composed.mode, "locals": []}
    for c in composed.locals:
        out["locals"].append({"omega": polytope_to_dict(c.omega), "W": polytope_to_dict(c.sys.W),
                              "accuracy": c.accuracy, "delta_hat": c.delta_hat})
    if report is not None:
        out["report"] = report
    return out


def read_controller_file(path, net):
    """Rebuild a :class:`ComposedController` for ``net`` from a controller file."""
    d = load_json(path)
    if not isinstance(d, dict) or d.get("kind") != "controller":
        raise SpecError(f"{path} is not a controller file")
    if d.get("mode") not in MODES:
        raise SpecError(f"{path}: bad mode {d.get('mode')!r}")
    entries = d.get("locals", [])
    if len(entries) != len(net):
        raise SpecError(f"{path} has {len(entries)} local controllers, the network has {len(net)}")
    ctrls = []
    for i, (e, sub) in enumerate(zip(entries, net.subsystems)):
        W = polytope_from_dict(e["W"], f"locals[{i}].W")
        omega = polytope_from_dict(e["omega"], f"locals[{i}].omega")
        if W.dim != sub.n or omega.dim != sub.n:
            raise SpecError(f"locals[{i}] does not match subsystem {i}")
        sys = LinearSystem(sub.A, sub.B, W, sub.X, sub.U)
        ctrls.append(SafetyController(sys, omega, d["mode"], e.get("accuracy"),
                                      float(e.get("delta_hat", 0.0))))
    return ComposedController(ctrls, d["mode"])


def report_dict(obj):
    """Plain-JSON view of a dataclass report (NaN becomes null)."""
    out = {}
    for k, v in vars(obj).items():
        if isinstance(v, (np.floating, np.integer)):
            v = v.item()
        out[k] = _check_float(v)
    return out


__all__ = [
    "Spec", "parse_spec", "load_spec", "polytope_from_dict", "polytope_to_dict", "dump_json",
    "load_json", "write_set_file", "read_set_file", "controller_to_dict", "read_controller_file",
    "report_dict",
]
