"""Set-valued safety controllers induced by a robust controlled invariant set."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import lp
from . import polytope as pt
from .exceptions import DimensionMismatch, Infeasible, OutsideDomain, SynthesisInfeasible
from .polytope import HPolytope
from .rci import DEFAULT_MAX_ITER, LinearSystem, inner_approx, outer_approx, verify_rci

MODES = ("outer", "inner", "exact")


class SafetyController:
    """Admissible inputs ``{u in U : A x + B u + W inside omega}``.

    Parameters
    ----------
    sys : LinearSystem
    omega : HPolytope
        Controller domain; an RCI set for ``inner``/``exact`` controllers and
        an outer approximation for ``outer`` ones.
    mode : {"outer", "inner", "exact"}
    accuracy : float, optional
        The ``eps`` or ``rho`` the set was computed with.
    delta_hat : float
        Measured safe-set violation of ``omega``.
    """

    def __init__(self, sys, omega, mode="inner", accuracy=None, delta_hat=0.0):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if omega.dim != sys.n:
            raise DimensionMismatch(f"omega has dimension {omega.dim}, system has {sys.n}")
        self.sys = sys
        self.omega = omega
        self.mode = mode
        self.accuracy = accuracy
        self.delta_hat = delta_hat
        if pt.is_empty(omega):
            self.eroded_omega = HPolytope.empty(sys.n)
        else:
            shift = sys.disturbance_support(omega.A)
            # keep every row so the relaxation LP below can shift them uniformly
            self.eroded_omega = HPolytope._raw(omega.A, omega.b - shift, sys.n)
        # support of the unit ball on each row; shifting by t * l1 gives omega + t*B
        # (exact up to dimension two)
        self._l1 = np.abs(self.eroded_omega.A).sum(axis=1)
        self.relaxations = []

    def __repr__(self):
        return f"SafetyController(mode={self.mode!r}, n={self.sys.n}, m={self.sys.m})"

    def _rows(self, x):
        E = self.eroded_omega
        sys = self.sys
        G = np.vstack([E.A @ sys.B, sys.U.A])
        h = np.concatenate([E.b - E.A @ (sys.A @ x), sys.U.b])
        return G, h

    def _check_x(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.sys.n,):
            raise DimensionMismatch(f"state must have shape ({self.sys.n},)")
        return x

    def admissible_inputs(self, x):
        """Inputs in ``U`` keeping every successor of ``x`` inside ``omega``."""
        x = self._check_x(x)
        if self.eroded_omega.is_canonical_empty or not self.in_domain(x):
            return HPolytope.empty(self.sys.m)
        G, h = self._rows(x)
        return HPolytope(G, h, dim=self.sys.m)

    def in_domain(self, x):
        return pt.contains_point(self.omega, self._check_x(x))

    def select_input(self, x):
        """Least-norm admissible input.

        For an outer controller whose admissible set is empty at a point of
        ``omega``, the target is relaxed to ``omega + t*B`` with the smallest
        feasible ``t``; the realised ``t`` is appended to ``relaxations``.

        Raises
        ------
        OutsideDomain
            If no admissible input exists.
        """
        x = self._check_x(x)
        if self.eroded_omega.is_canonical_empty or not self.in_domain(x):
            raise OutsideDomain(f"{x} is outside the controller domain")
        G, h = self._rows(x)
        try:
            return lp.min_norm_point(G, h)
        except Infeasible:
            if self.mode == "outer":
                return self._relaxed_input(x)
        raise OutsideDomain(f"no admissible input at {x}")

    def _relaxed_input(self, x):
        G, h = self._rows(x)
        k = self.eroded_omega.n_rows
        m = self.sys.m
        slack = np.concatenate([-self._l1, np.zeros(self.sys.U.n_rows)])
        Gt = np.vstack([np.hstack([G, slack[:, None]]), np.eye(m + 1)[-1:] * -1.0])
        ht = np.concatenate([h, [0.0]])
        c = np.zeros(m + 1)
        c[-1] = -1.0
        out = lp.maximize(c, Gt, ht)
        if out.status is not lp.Status.OPTIMAL:
            raise OutsideDomain(f"no admissible input at {x}")
        t = -out.value + lp.TOL_LP
        h_relaxed = h.copy()
        h_relaxed[:k] += t * self._l1
        self.relaxations.append(t)
        return lp.min_norm_point(G, h_relaxed)


def synthesize(sys, mode="inner", accuracy=0.01, max_iter=DEFAULT_MAX_ITER):
    """Run the outer or inner scheme and wrap the result as a controller.

    Returns ``(controller, result)``; ``controller`` is ``None`` if the set is
    empty.
    """
    if mode == "outer":
        result = outer_approx(sys, accuracy, max_iter)
    elif mode == "inner":
        result = inner_approx(sys, accuracy, max_iter)
    else:
        raise ValueError("mode must be 'outer' or 'inner'")
    if result.empty:
        return None, result
    ctrl = SafetyController(sys, result.set, mode, accuracy, result.delta_hat)
    return ctrl, result


class RCIController(BaseEstimator):
    """Estimator-style wrapper: ``fit`` synthesises, ``predict`` selects inputs.

    Parameters
    ----------
    mode : {"inner", "outer"}
    accuracy : float
        ``rho`` for the inner scheme, ``eps`` for the outer one.
    max_iter : int

    Attributes
    ----------
    controller_ : SafetyController
    omega_ : HPolytope
    result_ : RciResult
    n_iter_ : int
    """

    def __init__(self, mode="inner", accuracy=0.01, max_iter=DEFAULT_MAX_ITER):
        self.mode = mode
        self.accuracy = accuracy
        self.max_iter = max_iter

    def fit(self, system, y=None):
        if not isinstance(system, LinearSystem):
            raise TypeError("fit expects a LinearSystem")
        ctrl, result = synthesize(system, self.mode, self.accuracy, self.max_iter)
        self.result_ = result
        self.n_iter_ = result.iterations
        if ctrl is None:
            raise SynthesisInfeasible(0)
        self.controller_ = ctrl
        self.omega_ = result.set
        self.n_features_in_ = system.n
        return self

    def predict(self, states):
        """Least-norm safe input for each row of ``states``."""
        check_is_fitted(self, "controller_")
        states = check_array(states)
        self._check_width(states)
        return np.array([self.controller_.select_input(x) for x in states])

    def in_domain(self, states):
        check_is_fitted(self, "controller_")
        states = check_array(states)
        self._check_width(states)
        return pt.contains_points(self.omega_, states)

    def verify(self):
        check_is_fitted(self, "controller_")
        return verify_rci(self.controller_.sys, self.omega_)

    def _check_width(self, states):
        if states.shape[1] != self.n_features_in_:
            raise DimensionMismatch(
                f"states have {states.shape[1]} columns, controller expects {self.n_features_in_}")
