import numpy as np
import pytest

from skinfree.data.synth import make_body
from skinfree.errors import GeometryError
from skinfree.geometry import (
    BodyCollider,
    brute_force_closest,
    build_bvh,
    closest_point_on_triangles,
    closest_triangles,
    nearest_in_set,
    signed_distance,
)
from skinfree.geometry.closest_point import EDGE_AB, FACE, VERTEX_C
from skinfree.mesh import TriMesh

TRI = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


@pytest.mark.parametrize("point, expected, feature", [
    ([0.2, 0.2, 1.0], [0.2, 0.2, 0.0], FACE),
    ([0.5, -1.0, 0.0], [0.5, 0.0, 0.0], EDGE_AB),
    ([-0.5, 2.0, 3.0], [0.0, 1.0, 0.0], VERTEX_C),
])
def test_closest_point_regions(point, expected, feature):
    p = np.array([point])
    cp, code = closest_point_on_triangles(p, TRI[None, 0], TRI[None, 1], TRI[None, 2])
    np.testing.assert_allclose(cp[0], expected)
    assert code[0] == feature


def test_bvh_matches_brute_force(tiny_rig):
    body = make_body(tiny_rig, [0.4, -0.3])
    bvh = build_bvh(body, leaf_size=4)
    assert len(bvh.leaves()) > 1
    points = np.random.default_rng(0).uniform([-150, -400, -150], [150, 100, 150], size=(200, 3))
    d2, cp, tri, _ = closest_triangles(bvh, points)
    ref_d2, ref_cp, ref_tri, _ = brute_force_closest(body, points)
    np.testing.assert_allclose(d2, ref_d2, rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(cp, ref_cp, atol=1e-7)


def test_signed_distance_of_box(box):
    collider = BodyCollider(box)
    result = signed_distance(np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 80.0], [80.0, 80.0, 0.0],
                                       [70.0, 70.0, 70.0]]), collider)
    np.testing.assert_allclose(result.distance,
                               [-50.0, 30.0, np.hypot(30.0, 30.0), np.sqrt(3) * 20.0])
    np.testing.assert_allclose(result.pseudo_normal[1], [0.0, 0.0, 1.0])
    np.testing.assert_allclose(result.closest_point[3], [50.0, 50.0, 50.0])


def test_body_signed_distance_sign(tiny_rig):
    collider = BodyCollider(make_body(tiny_rig))
    inside = np.array([[0.0, -50.0, 0.0], [0.0, -150.0, 0.0], [0.0, -250.0, 0.0]])
    outside = np.array([[0.0, -150.0, 200.0], [300.0, -100.0, 0.0]])
    assert np.all(collider.query(inside).distance < 0)
    assert np.all(collider.query(outside).distance > 0)


def test_scaled_collider(box):
    collider = BodyCollider(box).scaled(0.001)
    result = collider.query(np.array([[0.0, 0.0, 0.08]]))
    assert result.distance[0] == pytest.approx(0.03)


def test_nearest_in_set_breaks_ties_by_index(sheet):
    # Vertex 7 sits one grid step from both 1 and 6.
    index, distance = nearest_in_set(7, [6, 1], sheet)
    assert index == 1
    assert distance == pytest.approx(40.0)

    indices, distances = nearest_in_set(np.array([0, 35]), [0, 35], sheet)
    np.testing.assert_array_equal(indices, [0, 35])
    np.testing.assert_array_equal(distances, [0.0, 0.0])


def test_nearest_in_set_ties_beyond_the_first_neighbours():
    # Twelve cuboctahedron corners are all exactly sqrt(2) from the origin.
    corners = [[a, b, 0.0] for a in (-1.0, 1.0) for b in (-1.0, 1.0)]
    corners += [[a, 0.0, b] for a in (-1.0, 1.0) for b in (-1.0, 1.0)]
    corners += [[0.0, a, b] for a in (-1.0, 1.0) for b in (-1.0, 1.0)]
    mesh = TriMesh([[0.0, 0.0, 0.0]] + corners[::-1], [[0, 1, 2]])
    for candidates in (np.arange(1, 13), np.arange(12, 0, -1), np.arange(5, 13)):
        index, distance = nearest_in_set(0, candidates, mesh)
        assert index == candidates.min()
        assert distance == pytest.approx(np.sqrt(2.0))


def test_nearest_in_set_needs_candidates(sheet):
    with pytest.raises(GeometryError):
        nearest_in_set(0, [], sheet)
