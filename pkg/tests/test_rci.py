import numpy as np
import pytest

from iforge import polytope as pt
from iforge.exceptions import IterationLimit, ResolutionTooCoarse, UnsupportedDimension
from iforge.polytope import HPolytope
from iforge.rci import (
    LinearSystem,
    grid_oracle_maximal_rci,
    inner_approx,
    outer_approx,
    pre,
    pre_rho,
    verify_rci,
)

from .conftest import interval, scalar_system

# frozen maximal RCI set of the double integrator fixture (outer scheme, eps = 0.01)
DI_OUTER_VERTICES = [
    [-5.0, 0.1], [-4.1, -0.8], [-2.3, -1.7], [0.4, -2.6], [4.0, -3.5], [5.0, -3.7],
    [5.0, -0.1], [4.1, 0.8], [2.3, 1.7], [-0.4, 2.6], [-4.0, 3.5], [-5.0, 3.7],
]
DI_ORACLE_POINTS = 18509


def test_pre_interval():
    sys = scalar_system(0.5, 0.25)
    assert pt.equals(pre(sys, sys.X), interval(-1.25, 1.25))


def test_pre_identity():
    B = np.array([[1.0, 2.0], [0.5, -1.0]])
    sys = LinearSystem(np.eye(2), B, HPolytope.point([0, 0]), HPolytope.box([-9, -9], [9, 9]),
                       HPolytope.point([0, 0]))
    R = HPolytope([[1, 2], [-1, 0], [0, -1]], [2, 0.5, 0.5])
    assert pt.equals(pre(sys, R), R)


def test_pre_double_integrator_frozen(double_integrator):
    got = pt.vertices_2d(pre(double_integrator, HPolytope.box([-1, -1], [1, 1])))
    assert got == pytest.approx(np.array([[-2.8, 1.9], [1.0, -1.9], [2.8, -1.9], [-1.0, 1.9]]))


def test_pre_against_brute_force(double_integrator):
    sys = double_integrator
    R = HPolytope.box([-1, -1], [1, 1])
    P = pre(sys, R)
    g = np.arange(-3.0, 3.0001, 0.05)
    X = np.array(np.meshgrid(g, g, indexing="ij")).reshape(2, -1).T
    us = np.arange(-1.0, 1.0001, 0.01)
    ws = pt.extreme_points(sys.W)
    succ = (X @ sys.A.T)[:, None, None, :] + (us[:, None] * sys.B[:, 0])[None, :, None, :] \
        + ws[None, None, :, :]
    ok = np.all(np.abs(succ) <= 1 + 1e-9, axis=-1).all(axis=-1).any(axis=-1)
    far = np.array([pt.distance(P, x) for x in X]) > 0.02
    inside = pt.contains_points(P, X)
    deep = pt.contains_points(pt.pontryagin_diff(P, HPolytope.unit_ball(2).scaled(0.02)), X)
    # away from the boundary the two agree exactly
    assert np.array_equal(ok[deep], inside[deep])
    assert not ok[far & ~inside].any()


def test_pre_rho():
    sys = scalar_system(0.5, 0.25)
    assert pt.equals(pre_rho(sys, sys.X, 0.0), pre(sys, sys.X))
    assert pt.equals(pre_rho(sys, sys.X, 0.25), interval(-1, 1))
    assert pt.contains_set(pre_rho(sys, sys.X, 0.2), pre_rho(sys, sys.X, 0.1))


def test_outer_fixed_point_is_x(holds_1d):
    res = outer_approx(holds_1d, 0.01)
    assert not res.empty and pt.equals(res.set, holds_1d.X)
    assert res.delta_hat == 0.0


def test_outer_empty_when_disturbance_wins(shrinks_1d):
    res = outer_approx(shrinks_1d, 0.01)
    assert res.empty and res.iterations <= 15


def test_inner_examples():
    res = inner_approx(scalar_system(0.2, 0.05), 0.05)
    assert pt.equals(res.set, interval(-1, 1))
    assert inner_approx(scalar_system(0.1, 0.3), 0.01).empty


def test_iteration_limit():
    # slow contraction: each step trims 0.001 per side
    with pytest.raises(IterationLimit):
        outer_approx(scalar_system(0.1, 0.101), 1e-6, max_iter=5)


def test_verify_rci(holds_1d, shrinks_1d):
    assert verify_rci(holds_1d, holds_1d.X)
    assert not verify_rci(shrinks_1d, shrinks_1d.X)


def test_double_integrator_frozen(double_integrator):
    out = outer_approx(double_integrator, 0.01)
    inner = inner_approx(double_integrator, 0.01)
    assert pt.vertices_2d(out.set) == pytest.approx(np.array(DI_OUTER_VERTICES), abs=1e-7)
    assert pt.contains_set(inner.set, out.set)
    assert verify_rci(double_integrator, inner.set)


def test_grid_oracle_frozen(double_integrator):
    pts = grid_oracle_maximal_rci(double_integrator, 0.05)
    assert len(pts) == DI_ORACLE_POINTS
    out = outer_approx(double_integrator, 0.01)
    assert pt.contains_points(out.set, pts).all()


def test_grid_oracle_trivial_cases(holds_1d, shrinks_1d):
    assert len(grid_oracle_maximal_rci(holds_1d, 0.1)) == 21
    assert len(grid_oracle_maximal_rci(shrinks_1d, 0.1)) == 0
    with pytest.raises(ResolutionTooCoarse):
        grid_oracle_maximal_rci(holds_1d, 0.5)
    big = LinearSystem(np.eye(3), np.eye(3), HPolytope.box([0] * 3, [0] * 3),
                       HPolytope.box([-1] * 3, [1] * 3), HPolytope.box([-1] * 3, [1] * 3))
    with pytest.raises(UnsupportedDimension):
        grid_oracle_maximal_rci(big, 0.1)


def test_box_input_path_matches_lifted_projection(rng):
    # a box U takes the segment-sum route; compare with the plain lifted projection
    for _ in range(5):
        A = np.eye(2) + rng.normal(scale=0.3, size=(2, 2))
        B = rng.normal(size=(2, 2))
        W = HPolytope.box([-0.05, -0.05], [0.05, 0.05])
        X = HPolytope.box([-2, -2], [2, 2])
        box_u = LinearSystem(A, B, W, X, HPolytope.box([-0.5, -0.3], [0.5, 0.3]))
        assert box_u._u_box is not None
        target = HPolytope([[1, 0.5], [-1, 0.2], [0, 1], [0.3, -1]], [1.5, 1.5, 1.2, 1.0])
        assert pt.equals(pre(box_u, target), _lifted_pre(box_u, target))


def _lifted_pre(sys, R):
    E = pt.pontryagin_diff(R, sys.W)
    n = sys.n
    rows = np.vstack([np.hstack([E.A @ sys.A, E.A @ sys.B]),
                      np.hstack([np.zeros((sys.U.n_rows, n)), sys.U.A])])
    L = HPolytope(rows, np.concatenate([E.b, sys.U.b]))
    return pt.project(L, list(range(n)))
