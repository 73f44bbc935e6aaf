import numpy as np
import pytest

from conforay import (AnalyticConformalFactor, Box, DefinitenessError, DGrid,
                      MetricFieldOnD, VarianceError,
                      christoffels_from_metric_field, conformal_christoffel,
                      metric_apply, project_semigeodesic, spd_mask)


def uniform_grid(m=20, nt=16, dy=0.05, dt=0.05):
    return DGrid((dy,), dt, (m,), np.full((m,), nt, int))


def test_spd_mask_classifies():
    mats = np.stack([np.eye(2),
                     np.array([[1.0, 2.0], [2.0, 1.0]]),
                     np.array([[-1.0, 0.0], [0.0, 1.0]]),
                     np.array([[2.0, 0.3], [0.3, 1.0]])])
    assert spd_mask(mats).tolist() == [True, False, False, True]


def test_metric_field_inverse_roundtrip():
    rng = np.random.default_rng(5)
    grid = uniform_grid(m=6, nt=4)
    a = rng.normal(size=(6, 4, 2, 2))
    contra = np.einsum("...ij,...kj->...ik", a, a) + 2.0 * np.eye(2)
    metric = MetricFieldOnD.from_contravariant(grid, contra)
    prod = np.einsum("...ij,...jk->...ik", metric.cov, metric.contra)
    assert np.allclose(prod, np.eye(2), atol=1e-12)
    assert metric.valid.all()


def test_metric_field_rejects_indefinite():
    grid = uniform_grid(m=4, nt=3)
    contra = np.broadcast_to(np.eye(2), (4, 3, 2, 2)).copy()
    contra[2, 1] = np.array([[1.0, 0.0], [0.0, -1.0]])
    with pytest.raises(DefinitenessError):
        MetricFieldOnD.from_contravariant(grid, contra)


def test_metric_field_nan_nodes_marked_invalid():
    grid = uniform_grid(m=4, nt=3)
    contra = np.broadcast_to(np.eye(2), (4, 3, 2, 2)).copy()
    contra[1, 2] = np.nan
    metric = MetricFieldOnD.from_contravariant(grid, contra)
    assert not metric.valid[1, 2]
    assert np.all(np.isnan(metric.cov[1, 2]))


def test_metric_apply_variance_rules():
    grid = uniform_grid(m=3, nt=3)
    contra = np.broadcast_to(np.diag([4.0, 1.0]), (3, 3, 2, 2))
    metric = MetricFieldOnD.from_contravariant(grid, contra)
    v = np.array([1.0, 0.0])
    assert metric_apply(metric, (0, 0), v, v) == pytest.approx(0.25)
    assert metric_apply(metric, (0, 0), v, v, "covector", "covector") \
        == pytest.approx(4.0)
    with pytest.raises(VarianceError):
        metric_apply(metric, (0, 0), v, v, "vector", "covector")


def test_christoffels_vanish_for_constant_metric():
    grid = uniform_grid()
    cov = np.broadcast_to(np.diag([2.25, 1.0]), grid.shape + (2, 2))
    metric = MetricFieldOnD.from_covariant(grid, cov.copy())
    gamma = christoffels_from_metric_field(metric)
    assert np.nanmax(np.abs(gamma)) < 1e-12


def test_christoffels_match_conformal_closed_form():
    """A tabulated rho * identity metric reproduces the analytic symbols
    of the conformal factor to stencil accuracy."""
    grid = uniform_grid(m=40, nt=30, dy=0.02, dt=0.02)
    box = Box(np.array([-0.5, -0.5]), np.array([1.5, 1.5]))
    rho = AnalyticConformalFactor(
        box,
        lambda x: 1.0 + 0.4 * np.sin(np.asarray(x)[..., 0])
        * np.cos(np.asarray(x)[..., 1]),
        lambda x: np.stack(
            [0.4 * np.cos(np.asarray(x)[..., 0]) * np.cos(np.asarray(x)[..., 1]),
             -0.4 * np.sin(np.asarray(x)[..., 0]) * np.sin(np.asarray(x)[..., 1])],
            axis=-1))
    y = 0.02 * np.arange(40)
    t = 0.02 * np.arange(30)
    pts = np.stack(np.meshgrid(y, t, indexing="ij"), axis=-1)
    vals = rho.value(pts)
    cov = vals[..., None, None] * np.eye(2)
    metric = MetricFieldOnD.from_covariant(grid, cov)
    gamma = christoffels_from_metric_field(metric, order=2)
    expect = conformal_christoffel(rho, pts)
    err = np.nanmax(np.abs(gamma - expect))
    assert err < 5e-4


def test_project_semigeodesic_block_form():
    grid = uniform_grid(m=5, nt=4)
    rng = np.random.default_rng(9)
    a = rng.normal(size=(5, 4, 2, 2))
    cov = np.einsum("...ij,...kj->...ik", a, a) + 2.0 * np.eye(2)
    metric = MetricFieldOnD.from_covariant(grid, cov)
    proj = project_semigeodesic(metric)
    assert np.allclose(proj.cov[..., 1, 1], 1.0)
    assert np.allclose(proj.cov[..., 0, 1], 0.0)
    assert np.allclose(proj.cov[..., 0, 0], metric.cov[..., 0, 0])
