import numpy as np

from conforay import PhantomSpec, build_normal_chart, circle_arc_boundary, segment_boundary


def test_flat_chart_is_affine_in_t():
    spec = PhantomSpec(kind="flat-constant", params={"constant": 2.25})
    rho, _ = spec.build()
    bg = segment_boundary([0.0, 0.0], [1.0, 0.0], 17)
    chart = build_normal_chart(rho, bg, dt=0.05, t_max=0.5)
    assert chart.grid.t_counts.min() == chart.grid.nt
    t = chart.grid.t_values()
    expect = bg.points[:, None, :] + (t[None, :, None] / 1.5) * bg.normals[:, None, :]
    assert np.abs(chart.positions - expect).max() < 1e-12
    assert not chart.truncated.any()
    assert not chart.exited.any()


def test_flat_chart_pullback_metric():
    """Straight boundary, constant factor: the chart metric is the constant
    block diag(rho, 1) and the Jacobian determinant never decays."""
    spec = PhantomSpec(kind="flat-constant", params={"constant": 2.25})
    rho, _ = spec.build()
    bg = segment_boundary([0.0, 0.0], [1.0, 0.0], 17)
    chart = build_normal_chart(rho, bg, dt=0.05, t_max=0.5)
    g = chart.pullback_metric_cov(rho)
    assert np.nanmax(np.abs(g[..., 0, 0] - 2.25)) < 1e-10
    assert np.nanmax(np.abs(g[..., 1, 1] - 1.0)) < 1e-10
    assert np.nanmax(np.abs(g[..., 0, 1])) < 1e-10
    ratio = chart.jac_dets / chart.jac_dets[..., :1]
    assert np.nanmin(np.abs(ratio)) > 0.9


def test_disk_columns_truncate_before_center():
    """Inward normals of a full circle focus at the center; every column
    must stop before the Jacobian crosses the guard threshold."""
    spec = PhantomSpec(kind="flat-constant",
                       params={"constant": 1.0, "box_lo": [-1.3, -1.3],
                               "box_hi": [1.3, 1.3]})
    rho, _ = spec.build()
    bg = circle_arc_boundary([0.0, 0.0], 1.0, 64)
    h = 1.0 / 32
    chart = build_normal_chart(rho, bg, dt=h, t_max=1.0)
    assert chart.truncated.all()
    extents = chart.grid.extents()
    assert np.all(extents >= 1.0 - 3 * h)
    assert np.all(extents <= 1.0)
    # the envelope shrinks with the columns
    assert chart.grid.nt == int(chart.grid.t_counts.max())
    assert chart.positions.shape[-2] == chart.grid.nt
    # radial geodesics: gamma(y, t) sits at radius 1 - t
    t = chart.grid.t_values()
    radii = np.linalg.norm(chart.positions, axis=-1)
    ok = chart.grid.valid_mask()
    assert np.abs(radii[ok] - (1.0 - np.broadcast_to(t, radii.shape)[ok])).max() < 1e-10


def test_tighter_jacobian_guard_truncates_earlier():
    spec = PhantomSpec(kind="flat-constant",
                       params={"constant": 1.0, "box_lo": [-1.3, -1.3],
                               "box_hi": [1.3, 1.3]})
    rho, _ = spec.build()
    bg = circle_arc_boundary([0.0, 0.0], 1.0, 48)
    loose = build_normal_chart(rho, bg, dt=1 / 32, t_max=1.0, theta_j=0.05)
    tight = build_normal_chart(rho, bg, dt=1 / 32, t_max=1.0, theta_j=0.5)
    assert tight.grid.t_counts.max() < loose.grid.t_counts.max()


def test_exit_marks_columns_without_truncation():
    spec = PhantomSpec(kind="flat-constant",
                       params={"constant": 1.0, "box_lo": [0.0, 0.0],
                               "box_hi": [1.0, 0.2]})
    rho, _ = spec.build()
    bg = segment_boundary([0.0, 0.0], [1.0, 0.0], 17)
    chart = build_normal_chart(rho, bg, dt=0.05, t_max=0.5)
    assert chart.exited.all()
    assert not chart.truncated.any()
    assert chart.grid.extents().max() <= 0.2 + 1e-12
