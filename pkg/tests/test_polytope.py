import numpy as np
import pytest

from iforge import polytope as pt
from iforge.exceptions import DegenerateGeometry, DimensionMismatch, EmptySet, UnboundedDirection
from iforge.polytope import HPolytope

BOX = HPolytope.box([-1, -1], [1, 1])
DIAMOND = HPolytope([[1, 1], [1, -1], [-1, 1], [-1, -1]], [1, 1, 1, 1])


def hull_oracle(points):
    """H-rep of the convex hull of 2-D points via scipy."""
    from scipy.spatial import ConvexHull

    hull = ConvexHull(points)
    return HPolytope(hull.equations[:, :2], -hull.equations[:, 2])


def test_rows_are_normalized():
    P = HPolytope([[2.0, 0.0], [0.0, -4.0]], [6.0, 8.0])
    assert np.abs(P.A).max(axis=1) == pytest.approx([1.0, 1.0])
    assert P.b == pytest.approx([3.0, 2.0])


@pytest.mark.parametrize("d,expected", [((1, 0), 1.0), ((1, 1), 2.0), ((-2, 0.5), 2.5)])
def test_support_of_box(d, expected):
    assert pt.support(BOX, np.array(d, float)) == pytest.approx(expected)


def test_support_errors():
    with pytest.raises(EmptySet):
        pt.support(HPolytope([[1.0], [-1.0]], [0.0, -1.0]), np.array([1.0]))
    with pytest.raises(UnboundedDirection):
        pt.support(HPolytope([[-1.0]], [0.0]), np.array([1.0]))


def test_emptiness():
    assert not pt.is_empty(BOX)
    assert pt.is_empty(HPolytope([[1.0], [-1.0]], [-1.0, 0.0]))
    assert not pt.is_empty(HPolytope([[1.0], [-1.0]], [0.0, 0.0]))
    E = HPolytope.empty(3)
    assert pt.is_empty(E) and E.is_canonical_empty


def test_point_membership():
    assert pt.contains_point(BOX, [0, 0])
    assert not pt.contains_point(BOX, [2, 0])
    assert pt.contains_point(BOX, [1, 0])


def test_set_containment():
    assert pt.contains_set(BOX, BOX.scaled(2))
    assert not pt.contains_set(BOX.scaled(2), BOX)
    assert pt.contains_set(DIAMOND, BOX)
    assert pt.contains_set(HPolytope.empty(2), BOX)


def test_intersection():
    Q = pt.intersect(BOX, HPolytope.box([0, 0], [2, 2]))
    assert pt.equals(Q, HPolytope.box([0, 0], [1, 1]))
    assert Q.n_rows == 4
    assert pt.equals(pt.intersect(BOX, HPolytope.universe(2)), BOX)
    assert pt.is_empty(pt.intersect(BOX, HPolytope.box([3, 3], [4, 4])))


def test_ball_dilation():
    assert pt.equals(pt.minkowski_sum_ball(BOX, 1.0), BOX.scaled(2))
    assert pt.equals(pt.minkowski_sum_ball(DIAMOND, 0.0), DIAMOND)
    octagon = pt.minkowski_sum_ball(DIAMOND, 1.0)
    corners = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]])
    offsets = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]])
    oracle = hull_oracle((corners[:, None, :] + offsets[None, :, :]).reshape(-1, 2))
    assert pt.equals(octagon, oracle)
    assert len(pt.vertices_2d(octagon)) == 8


def test_minkowski_sum():
    assert pt.equals(pt.minkowski_sum(BOX, BOX), BOX.scaled(2))
    assert pt.equals(pt.minkowski_sum(DIAMOND, HPolytope.point([0, 0])), DIAMOND)
    S = pt.minkowski_sum(DIAMOND, HPolytope.box([-0.5, -0.2], [0.5, 0.2]))
    dv = pt.vertices_2d(DIAMOND)
    bv = pt.vertices_2d(HPolytope.box([-0.5, -0.2], [0.5, 0.2]))
    assert pt.equals(S, hull_oracle((dv[:, None] + bv[None]).reshape(-1, 2)))


def test_segment_sum_matches_general_sum(rng):
    for _ in range(10):
        P = hull_oracle(rng.normal(size=(8, 2)))
        g = rng.normal(size=2)
        exact = pt.affine_image(HPolytope.box([-1], [1]), g.reshape(2, 1))
        assert pt.equals(pt.minkowski_sum_segment(P, g), pt.minkowski_sum(P, exact))


def test_pontryagin_difference():
    assert pt.equals(pt.pontryagin_diff(BOX.scaled(2), BOX), BOX)
    assert pt.equals(pt.pontryagin_diff(DIAMOND, HPolytope.point([0, 0])), DIAMOND)
    assert pt.is_empty(pt.pontryagin_diff(BOX, BOX.scaled(2)))


def test_affine_maps():
    assert pt.equals(pt.affine_preimage(BOX, 2 * np.eye(2)), BOX.scaled(0.5))
    assert pt.equals(pt.affine_preimage(BOX, np.eye(2)), BOX)
    U = pt.affine_preimage(BOX, np.zeros((2, 2)), np.array([0.5, 0.0]))
    assert pt.contains_point(U, [1e6, -1e6])
    assert pt.equals(pt.affine_image(BOX, np.eye(2)), BOX)
    sel = pt.affine_image(HPolytope.box([-1, -2, -3], [1, 2, 3]), np.array([[0, 1.0, 0]]))
    assert pt.equals(sel, HPolytope.box([-2], [2]))
    th = 0.3
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    assert pt.equals(pt.affine_image(BOX, R), hull_oracle(pt.vertices_2d(BOX) @ R.T))


def test_projection_examples():
    cube = HPolytope.box([-1] * 3, [1] * 3)
    assert pt.equals(pt.project(cube, [1, 2]), BOX)
    pinned = HPolytope([[1, 1], [-1, -1], [0, 1], [0, -1]], [1, 1, 0, 0])
    assert pt.equals(pt.project(pinned, [0]), HPolytope.box([-1], [1]))


def test_projection_against_vertex_oracle(rng):
    from scipy.spatial import ConvexHull

    for _ in range(5):
        pts = rng.normal(size=(12, 3))
        hull = ConvexHull(pts)
        P = HPolytope(hull.equations[:, :3], -hull.equations[:, 3])
        assert pt.equals(pt.project(P, [0, 2]), hull_oracle(pts[hull.vertices][:, [0, 2]]))


def test_redundancy_removal():
    dup = HPolytope(np.vstack([BOX.A, BOX.A[:1]]), np.concatenate([BOX.b, BOX.b[:1]]))
    assert pt.remove_redundancy(dup).n_rows == 4
    assert pt.remove_redundancy(BOX).n_rows == 4
    slack = HPolytope(np.vstack([BOX.A, [[1, 0]]]), np.concatenate([BOX.b, [5]]))
    assert pt.remove_redundancy(slack).n_rows == 4


def test_products():
    assert pt.equals(pt.cartesian_product(BOX, BOX), HPolytope.box([-1] * 4, [1] * 4))
    assert pt.is_empty(pt.cartesian_product(HPolytope.empty(1), BOX))
    rect = pt.cartesian_product(HPolytope.box([0], [2]), HPolytope.box([1], [3]))
    assert pt.equals(rect, HPolytope.box([0, 1], [2, 3]))


def test_chebyshev_center():
    c, r = pt.chebyshev_center(BOX)
    assert c == pytest.approx([0, 0], abs=1e-9) and r == pytest.approx(1.0)
    c, r = pt.chebyshev_center(HPolytope.box([0], [4]))
    assert c == pytest.approx([2.0]) and r == pytest.approx(2.0)
    with pytest.raises(EmptySet):
        pt.chebyshev_center(HPolytope.empty(2))


def test_vertices_ccw():
    v = pt.vertices_2d(BOX)
    assert v.tolist() == [[-1, -1], [1, -1], [1, 1], [-1, 1]]
    tri = HPolytope([[1, -1], [0, 1], [-1, 0]], [-4.5, 10, -4.5])
    assert pt.vertices_2d(tri) == pytest.approx(np.array([[4.5, 9], [5.5, 10], [4.5, 10]]))
    with pytest.raises(DegenerateGeometry):
        pt.vertices_2d(HPolytope.box([0, 0], [1, 0]))


def test_signed_area_positive(rng):
    for _ in range(5):
        v = pt.vertices_2d(hull_oracle(rng.normal(size=(10, 2))))
        x, y = v[:, 0], v[:, 1]
        assert 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) > 0


def test_sampled_points_inside(rng):
    pts = pt.sample_points(DIAMOND, 300, rng)
    assert pts.shape == (300, 2)
    assert pt.contains_points(DIAMOND, pts).all()


def test_dimension_checks():
    with pytest.raises(DimensionMismatch):
        pt.intersect(BOX, HPolytope.box([0], [1]))
