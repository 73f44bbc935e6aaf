import numpy as np
import pytest

from conforay import (DegenerateSpeedError, DGrid, GeometryError,
                      MarchDivergenceError, MetricFieldOnD,
                      assemble_cauchy_data, cke_march, reconstruct_gamma_rho,
                      segment_boundary, spectral_project)
from conforay.recovery import BoundaryRhoTrace


def flat_setup(num=32, rho_c=2.25, nt=20, dt=0.02):
    bg = segment_boundary([0.0, 0.0], [1.0, 0.0], num)
    grid = DGrid(bg.dy, dt, bg.bshape, np.full(bg.bshape, nt, int),
                 bg.periodic)
    cov = np.broadcast_to(np.diag([rho_c, 1.0]), grid.shape + (2, 2)).copy()
    metric = MetricFieldOnD.from_covariant(grid, cov)
    trace = BoundaryRhoTrace(rho=np.full(bg.bshape, rho_c),
                             residual=np.zeros(bg.bshape),
                             valid=np.ones(bg.bshape, bool))
    return bg, metric, trace


def test_spectral_project_preserves_constants():
    c = 3.7 * np.ones(40)
    for periodic in (False, True):
        out = spectral_project(c, 0.2, 0, periodic)
        assert np.abs(out - 3.7).max() < 1e-12


def test_spectral_project_damps_high_modes():
    rng = np.random.default_rng(31)
    m = 64
    x = np.arange(m) / m
    smooth = np.cos(2 * np.pi * x)
    noisy = smooth + 0.01 * rng.standard_normal(m)
    out = spectral_project(noisy, 0.15, 0, True)
    assert np.abs(out - smooth).max() < np.abs(noisy - smooth).max()


def test_spectral_project_cutoff_validation_and_nan():
    with pytest.raises(ValueError):
        spectral_project(np.ones(8), 0.0, 0, False)
    with pytest.raises(ValueError):
        spectral_project(np.ones(8), 1.5, 0, False)
    vals = np.ones(16)
    vals[3] = np.nan
    out = spectral_project(vals, 0.5, 0, False)
    assert np.isnan(out[3]) and np.isfinite(out[2])


def test_cauchy_data_layout():
    bg, _, trace = flat_setup(num=8)
    u0 = assemble_cauchy_data(trace, bg)
    assert u0.shape == (8, 2, 2)
    # tangential family: rho * tangent; normal family: sqrt(rho) * normal
    assert np.allclose(u0[:, 0, :], 2.25 * np.array([1.0, 0.0]))
    assert np.allclose(u0[:, 1, :], 1.5 * np.array([0.0, 1.0]))
    bad = BoundaryRhoTrace(rho=np.ones(5), residual=np.zeros(5),
                           valid=np.ones(5, bool))
    with pytest.raises(GeometryError):
        assemble_cauchy_data(bad, bg)


def test_march_constant_metric_is_stationary():
    """With vanishing Christoffels the transport equation is u' = 0."""
    bg, metric, trace = flat_setup()
    u0 = assemble_cauchy_data(trace, bg)
    fam = cke_march(metric, u0)
    assert fam.values.shape == (32, 20, 2, 2)
    drift = np.nanmax(np.abs(fam.values - u0[:, None, :, :]))
    assert drift < 1e-12
    lo, hi = fam.meta["monitor_layers"]
    assert (lo, hi) == (1, 18)
    assert np.nanmax(fam.layer_residuals[lo:hi + 1]) < 1e-10


def test_march_guard_trips_on_tiny_threshold():
    bg, metric, trace = flat_setup()
    rng = np.random.default_rng(3)
    u0 = assemble_cauchy_data(trace, bg)
    u0 = u0 + 1e-3 * rng.standard_normal(u0.shape)
    with pytest.raises(MarchDivergenceError):
        cke_march(metric, u0, eps_k=1e-12)


def test_march_filter_keeps_layers_finite():
    bg, metric, trace = flat_setup()
    u0 = assemble_cauchy_data(trace, bg)
    fam = cke_march(metric, u0, smooth_cutoff=0.25)
    assert np.all(np.isfinite(fam.values))
    assert fam.smooth_cutoff == 0.25


def test_reconstruct_recovers_flat_isometry():
    bg, metric, trace = flat_setup(rho_c=4.0)
    u0 = assemble_cauchy_data(trace, bg)
    fam = cke_march(metric, u0)
    rec = reconstruct_gamma_rho(fam, bg)
    t = metric.grid.t_values()
    expect = bg.points[:, None, :] + 0.5 * t[None, :, None] * np.array([0.0, 1.0])
    assert np.nanmax(np.abs(rec.gamma - expect)) < 1e-10
    assert np.nanmax(np.abs(rec.rho_on_gamma - 4.0)) < 1e-10
    assert rec.min_speed2 == pytest.approx(4.0)
    # columns (1, 0) and n / sqrt(rho): |det| = 1 / sqrt(rho)
    assert np.nanmax(np.abs(np.abs(rec.jac_dets) - 0.5)) < 1e-9


def test_reconstruct_rejects_degenerate_speed():
    bg, metric, trace = flat_setup()
    u0 = assemble_cauchy_data(trace, bg)
    fam = cke_march(metric, u0)
    fam.values[5, 7, 1, :] = 1e-8  # kill the normal-family row at one node
    with pytest.raises(DegenerateSpeedError):
        reconstruct_gamma_rho(fam, bg)
