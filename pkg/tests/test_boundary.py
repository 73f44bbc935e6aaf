import numpy as np
import pytest

from conforay import (AnalyticConformalFactor, Box, GeometryError,
                      circle_arc_boundary, inward_normal,
                      plane_patch_boundary, segment_boundary,
                      sphere_patch_boundary)


def test_segment_boundary_geometry():
    bg = segment_boundary([0.0, 0.0], [2.0, 0.0], 5)
    assert bg.n == 2
    assert bg.bshape == (5,)
    assert np.allclose(bg.points[:, 0], [0.0, 0.5, 1.0, 1.5, 2.0])
    assert np.allclose(bg.normals, [[0.0, 1.0]] * 5)
    assert np.allclose(bg.tangents[:, 0], [[1.0, 0.0]] * 5)
    assert bg.dy == (0.5,)
    right = segment_boundary([0.0, 0.0], [2.0, 0.0], 5, normal_side="right")
    assert np.allclose(right.normals, [[0.0, -1.0]] * 5)


def test_segment_boundary_rejects_degenerate_input():
    with pytest.raises(GeometryError):
        segment_boundary([0.0, 0.0], [0.0, 0.0], 5)
    with pytest.raises(GeometryError):
        segment_boundary([0.0, 0.0], [1.0, 0.0], 2)


def test_circle_boundary_normals_point_inward():
    bg = circle_arc_boundary([1.0, -2.0], 3.0, 64)
    assert bg.periodic == (True,)
    center = np.array([1.0, -2.0])
    rhat = (center - bg.points)
    rhat /= np.linalg.norm(rhat, axis=-1, keepdims=True)
    assert np.allclose(bg.normals, rhat, atol=1e-12)
    dots = np.einsum("ij,ij->i", bg.normals, bg.tangents[:, 0])
    assert np.abs(dots).max() < 1e-12


def test_open_arc_is_not_periodic():
    bg = circle_arc_boundary([0.0, 0.0], 1.0, 16, theta0=0.0,
                             theta1=np.pi / 2)
    assert bg.periodic == (False,)
    assert bg.bshape == (16,)


def test_plane_patch_shapes_and_orthogonality():
    bg = plane_patch_boundary([0.0, 0.0, 0.0], [1.0, 0.0, 0.0],
                              [0.0, 1.0, 0.0], (1.0, 2.0), (4, 5))
    assert bg.n == 3
    assert bg.bshape == (4, 5)
    assert np.allclose(bg.normals, [0.0, 0.0, 1.0])
    gram = np.einsum("...aj,...bj->...ab", bg.tangents, bg.tangents)
    assert np.all(np.linalg.det(gram) > 0)


def test_sphere_patch_normals_unit():
    bg = sphere_patch_boundary([0.0, 0.0, 0.0], 2.0,
                               (-0.6, 0.6), (0.5, 1.3), (6, 7))
    assert bg.bshape == (6, 7)
    assert np.allclose(np.linalg.norm(bg.normals, axis=-1), 1.0, atol=1e-12)
    dots = np.einsum("...j,...aj->...a", bg.normals, bg.tangents)
    assert np.abs(dots).max() < 1e-9


def test_inward_normal_scales_by_slowness():
    bg = segment_boundary([0.0, 0.0], [1.0, 0.0], 8)
    rho = AnalyticConformalFactor(
        Box(np.array([-1.0, -1.0]), np.array([2.0, 2.0])),
        lambda x: np.full(np.asarray(x).shape[:-1], 4.0),
        lambda x: np.zeros(np.asarray(x).shape))
    nu = inward_normal(rho, bg)
    # metric unit: rho |nu|^2 = 1
    assert np.allclose(np.linalg.norm(nu, axis=-1), 0.5, atol=1e-12)
