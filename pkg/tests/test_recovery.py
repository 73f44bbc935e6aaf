import numpy as np
import pytest

from conforay import (DefinitenessError, FieldRecoveryError, GenericityError,
                      PhantomSpec, recover_boundary_rho, recover_metric_field,
                      recover_metric_point, synthesize_dataset,
                      travel_time_gradients)


def flat_dataset(num=24, constant=2.25, dt=0.02, t_max=0.2, **kw):
    spec = PhantomSpec(kind="flat-constant", params={"constant": constant},
                       boundary={"kind": "segment", "p0": [0.0, 0.0],
                                 "p1": [1.0, 0.0], "num": num})
    rho, bg = spec.build()
    return synthesize_dataset(rho, bg, dt=dt, t_max=t_max,
                              tau_mode="analytic", **kw)


def unit_rows(angles):
    return np.stack([np.cos(angles), np.sin(angles)], axis=-1)


def test_point_solve_recovers_identity_from_unit_covectors():
    rng = np.random.default_rng(21)
    for _ in range(20):
        rows = unit_rows(rng.uniform(0, np.pi, size=6))
        if np.linalg.matrix_rank(np.stack(
                [rows[:, 0] ** 2, rows[:, 0] * rows[:, 1],
                 rows[:, 1] ** 2], axis=1)) < 3:
            continue
        g, cond, resid = recover_metric_point(rows, "full")
        assert np.abs(g - np.eye(2)).max() < 1e-10
        assert resid < 1e-12


def test_point_solve_recovers_anisotropic_tensor():
    target = np.array([[0.5, 0.1], [0.1, 1.5]])
    evals, evecs = np.linalg.eigh(np.linalg.inv(target))
    rng = np.random.default_rng(4)
    dirs = unit_rows(rng.uniform(0, np.pi, size=8))
    # scale each direction so that g(d, d) = 1 for the target tensor
    q = np.einsum("ri,ij,rj->r", dirs, target, dirs)
    rows = dirs / np.sqrt(q)[:, None]
    g, _, resid = recover_metric_point(rows, "full")
    assert np.abs(g - target).max() < 1e-9
    assert resid < 1e-10


def test_collinear_rows_rejected_by_condition_number():
    rows = np.stack([[1.0, 0.0]] * 5) * np.linspace(0.99, 1.01, 5)[:, None]
    with pytest.raises(GenericityError) as err:
        recover_metric_point(rows, "full")
    assert getattr(err.value, "cond", np.inf) > 1e8


def test_reduced_gate_drops_near_normal_rows():
    # all rows nearly parallel to the t axis carry no tangential signal
    rows = np.stack([[0.05, 0.999], [-0.04, 0.999], [0.03, 0.999]])
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    with pytest.raises(GenericityError):
        recover_metric_point(rows, "reduced")


def test_indefinite_solution_rejected():
    target = np.array([[1.0, 1.2], [1.2, 1.0]])  # eigenvalues -0.2 and 2.2
    angles = np.array([0.0, np.pi / 2, np.pi / 4, np.pi / 6])
    dirs = unit_rows(angles)
    q = np.einsum("ri,ij,rj->r", dirs, target, dirs)
    rows = dirs / np.sqrt(q)[:, None]
    with pytest.raises(DefinitenessError):
        recover_metric_point(rows, "full")


def test_gradients_match_chart_geometry():
    """Chart gradient of sqrt(rho) |x - source| is (sqrt(rho) d1, d2) / |d|
    for a segment boundary along the first axis.  Rows whose stencil window
    crosses a coverage rim abstain as NaN; every voting row must be exact."""
    ds = flat_dataset(num=24)
    tg = travel_time_gradients(ds)
    pts = ds.boundary.flat_points()
    t = ds.grid.t_values()
    sq = 1.5
    for j in (3, 11, 20):
        for k in (2, 5, 9):
            x = pts[j] + np.array([0.0, t[k] / sq])
            voting = 0
            for slot, s in enumerate(ds.sources[j]):
                got = tg.grads[j, k, slot]
                if not np.all(np.isfinite(got)):
                    assert tg.weights[j, k, slot] == 0
                    continue
                voting += 1
                d = x - pts[int(s)]
                r = np.linalg.norm(d)
                expect = np.array([sq * d[0], d[1]]) / r
                assert np.abs(got - expect).max() < 1e-11
            assert voting >= 3


def test_gradient_weights_vanish_where_gradients_missing():
    ds = flat_dataset(num=24)
    tg = travel_time_gradients(ds)
    have = np.all(np.isfinite(tg.grads), axis=-1)
    assert np.all(tg.weights[~have] == 0)
    assert np.all(tg.weights[have] > 0)


def test_field_recovery_full_mode_flat():
    ds = flat_dataset(num=24, sources_per_node=7)
    metric, diag = recover_metric_field(ds, "full", return_diagnostics=True)
    ok = metric.valid
    assert diag.fail_fraction == 0.0
    expect = np.diag([1 / 2.25, 1.0])
    assert np.abs(metric.contra[ok] - expect).max() < 1e-10
    assert diag.structure_error < 1e-10
    # boundary layer comes from the quadratic extrapolation, still exact here
    assert np.abs(metric.contra[:, 0] - expect).max() < 1e-10


def test_field_recovery_reduced_mode_flat():
    ds = flat_dataset(num=24)
    metric = recover_metric_field(ds, "reduced")
    ok = metric.valid
    assert np.abs(metric.contra[ok][:, 0, 0] - 1 / 2.25).max() < 1e-10
    # the reduced solve pins the normal block by construction
    assert np.allclose(metric.contra[ok][:, 1, 1], 1.0)
    assert np.allclose(metric.contra[ok][:, 0, 1], 0.0)


def test_field_recovery_fail_fraction_gate():
    ds = flat_dataset(num=24)
    ds.values[5:9, :, :] = np.nan  # four dead columns out of 24
    with pytest.raises(FieldRecoveryError):
        recover_metric_field(ds, "reduced")


def test_boundary_rho_readoff():
    ds = flat_dataset(num=24)
    metric = recover_metric_field(ds, "reduced")
    trace = recover_boundary_rho(metric, ds.boundary)
    assert np.abs(trace.rho - 2.25).max() < 1e-10
