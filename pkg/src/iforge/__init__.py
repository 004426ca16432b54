"""Robust controlled invariant sets and compositional safety controllers."""

from . import lp, polytope, rci, controller, network, sim, io
from .controller import RCIController, SafetyController, synthesize
from .exceptions import (
    DegenerateGeometry,
    DimensionMismatch,
    EmptySet,
    IForgeError,
    Infeasible,
    IterationLimit,
    NumericalFailure,
    OutsideDomain,
    ResolutionTooCoarse,
    SpecError,
    SynthesisInfeasible,
    UnboundedDirection,
    UnsupportedDimension,
)
from .network import (
    ComposedController,
    DecentralizedController,
    InterconnectedSystem,
    Subsystem,
    check_composed_safety,
    compose,
    synthesize_all,
    synthesize_local,
)
from .polytope import HPolytope
from .rci import LinearSystem, RciResult, inner_approx, outer_approx, pre, verify_rci

__version__ = "0.1.0"

__all__ = [
    "lp", "polytope", "rci", "controller", "network", "sim", "io",
    "HPolytope", "LinearSystem", "RciResult", "pre", "outer_approx", "inner_approx", "verify_rci",
    "SafetyController", "RCIController", "synthesize",
    "Subsystem", "InterconnectedSystem", "ComposedController", "DecentralizedController",
    "synthesize_local", "synthesize_all", "compose", "check_composed_safety",
    "IForgeError", "DimensionMismatch", "NumericalFailure", "Infeasible", "EmptySet",
    "UnboundedDirection", "DegenerateGeometry", "IterationLimit", "SynthesisInfeasible",
    "OutsideDomain", "ResolutionTooCoarse", "UnsupportedDimension", "SpecError",
]
