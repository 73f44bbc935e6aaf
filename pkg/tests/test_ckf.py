import numpy as np
import pytest

from conforay import (CATALOG_2D, DGrid, EuclideanCKFParams, MetricFieldOnD,
                      ParameterError, catalog_ckf_2d, cke_operator,
                      euclidean_ckf_eval)


def identity_metric(n, m, h):
    shape = (m,) * (n - 1)
    grid = DGrid((h,) * (n - 1), h, shape, np.full(shape, m, int))
    contra = np.broadcast_to(np.eye(n), grid.shape + (n, n)).copy()
    axes = [h * np.arange(m)] * n
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return MetricFieldOnD.from_contravariant(grid, contra), pts


def test_params_require_skew_generator():
    with pytest.raises(ParameterError):
        EuclideanCKFParams(A=np.array([[0.0, 1.0], [1.0, 0.0]]))
    p = EuclideanCKFParams(A=np.array([[0.0, 1.0], [-1.0, 0.0]]))
    assert p.n == 2
    with pytest.raises(ParameterError):
        EuclideanCKFParams()


def test_params_infer_dimension():
    p = EuclideanCKFParams(b=np.array([1.0, 0.0, 0.0]))
    assert p.n == 3
    assert p.A.shape == (3, 3)


def test_eval_special_inversion_term():
    # pure b term at x: -b|x|^2 + 2x (b.x)
    b = np.array([0.5, -0.25])
    p = EuclideanCKFParams(b=b)
    x = np.array([1.0, 2.0])
    expect = -b * 5.0 + 2.0 * x * (x @ b)
    assert np.allclose(euclidean_ckf_eval(p, x), expect)
    with pytest.raises(ParameterError):
        euclidean_ckf_eval(p, np.zeros(3))


def test_catalog_entries_and_unknown_kind():
    x = np.array([[0.3, 0.4]])
    assert np.allclose(catalog_ckf_2d("rotation", x), [[-0.4, 0.3]])
    assert np.allclose(catalog_ckf_2d("holomorphic-square", x),
                       [[0.3 ** 2 - 0.4 ** 2, 2 * 0.3 * 0.4]])
    with pytest.raises(ParameterError):
        catalog_ckf_2d("spiral", x)
    with pytest.raises(ParameterError):
        catalog_ckf_2d("rotation", np.zeros((1, 3)))


def test_operator_annihilates_catalog_fields():
    metric, pts = identity_metric(2, 33, 1 / 32)
    for kind in CATALOG_2D:
        u = catalog_ckf_2d(kind, pts)
        res = cke_operator(metric, u)
        tol = 1e-12 if kind != "holomorphic-exp" else 5e-3
        assert np.nanmax(np.abs(res)) < tol, kind


def test_operator_annihilates_quadratic_family_in_3d():
    rng = np.random.default_rng(15)
    metric, pts = identity_metric(3, 9, 1 / 8)
    for _ in range(5):
        raw = rng.normal(size=(3, 3))
        p = EuclideanCKFParams(a0=rng.normal(), A=raw - raw.T,
                               b=rng.normal(size=3), c=rng.normal(size=3))
        u = euclidean_ckf_eval(p, pts)
        res = cke_operator(metric, u)
        assert np.nanmax(np.abs(res)) < 1e-11


def test_operator_flags_non_conformal_field():
    metric, pts = identity_metric(2, 33, 1 / 32)
    u = np.stack([pts[..., 0] * pts[..., 1],
                  np.zeros(pts.shape[:-1])], axis=-1)
    res = cke_operator(metric, u)
    assert np.nanmax(np.abs(res)) > 0.1


def test_operator_output_is_trace_free():
    rng = np.random.default_rng(8)
    metric, pts = identity_metric(2, 17, 1 / 16)
    u = rng.normal(size=pts.shape)
    res = cke_operator(metric, u)
    trace = np.einsum("...ij,...ij->...", metric.contra, res)
    assert np.nanmax(np.abs(trace)) < 1e-12


def test_operator_family_axis():
    metric, pts = identity_metric(2, 17, 1 / 16)
    u1 = catalog_ckf_2d("rotation", pts)
    u2 = catalog_ckf_2d("dilation", pts)
    fam = np.stack([u1, u2], axis=-1)
    res = cke_operator(metric, fam)
    assert res.shape == metric.grid.shape + (2, 2, 2)
    with pytest.raises(ValueError):
        cke_operator(metric, u1[..., :1])
