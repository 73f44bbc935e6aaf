"""Metric tensor fields tabulated on a D grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DefinitenessError, VarianceError
from .grids import DGrid, grid_gradient

SPD_PIVOT_TOL = 1e-10


def spd_mask(mats: np.ndarray, tol: float = SPD_PIVOT_TOL) -> np.ndarray:
    """Vectorized Cholesky feasibility test with a relative pivot tolerance."""
    mats = np.asarray(mats, dtype=float)
    n = mats.shape[-1]
    ok = np.all(np.isfinite(mats), axis=(-2, -1))
    sym = np.abs(mats - np.swapaxes(mats, -1, -2)).max(axis=(-2, -1))
    scale = np.abs(mats).max(axis=(-2, -1)) + 1e-300
    ok &= sym <= 1e-8 * scale
    L = np.zeros_like(mats)
    work = np.where(ok[..., None, None], mats, np.eye(n))
    for j in range(n):
        d = work[..., j, j] - np.sum(L[..., j, :j] ** 2, axis=-1)
        ok &= d > tol * scale
        piv = np.sqrt(np.where(d > 0, d, 1.0))
        L[..., j, j] = piv
        for i in range(j + 1, n):
            L[..., i, j] = (work[..., i, j]
                            - np.sum(L[..., i, :j] * L[..., j, :j], axis=-1)) / piv
    return ok


def _batched_inverse(mats: np.ndarray, valid: np.ndarray) -> np.ndarray:
    out = np.full_like(mats, np.nan)
    if np.any(valid):
        out[valid] = np.linalg.inv(mats[valid])
    return out


@dataclass
class MetricFieldOnD:
    """Covariant/contravariant metric samples over a :class:`DGrid`.

    ``valid`` marks nodes carrying tensors; elsewhere entries are NaN.  The
    field is stored in the chart coordinates ``(y^1..y^{n-1}, t)``.
    """

    grid: DGrid
    cov: np.ndarray
    contra: np.ndarray
    valid: np.ndarray
    mode: str = "truth"

    @classmethod
    def from_contravariant(cls, grid: DGrid, contra: np.ndarray,
                           valid: np.ndarray = None, mode: str = "truth"):
        contra = np.asarray(contra, dtype=float)
        if valid is None:
            valid = grid.valid_mask() & np.all(np.isfinite(contra), axis=(-2, -1))
        _require_spd(contra, valid, "contravariant metric")
        cov = _batched_inverse(contra, valid)
        return cls(grid, cov, contra, valid, mode)

    @classmethod
    def from_covariant(cls, grid: DGrid, cov: np.ndarray,
                       valid: np.ndarray = None, mode: str = "truth"):
        cov = np.asarray(cov, dtype=float)
        if valid is None:
            valid = grid.valid_mask() & np.all(np.isfinite(cov), axis=(-2, -1))
        _require_spd(cov, valid, "covariant metric")
        contra = _batched_inverse(cov, valid)
        return cls(grid, cov, contra, valid, mode)

    @property
    def n(self) -> int:
        return self.grid.n


def _require_spd(mats, valid, what):
    ok = spd_mask(mats)
    bad = valid & ~ok
    if np.any(bad):
        node = tuple(int(v) for v in np.argwhere(bad)[0])
        raise DefinitenessError(f"{what} not SPD at node {node}", node=node)


def metric_apply(metric: MetricFieldOnD, node: tuple, a: np.ndarray,
                 b: np.ndarray, a_variance: str = "vector",
                 b_variance: str = "vector") -> float:
    """Inner product of two vectors (or two covectors) at a grid node."""
    if a_variance != b_variance:
        raise VarianceError(
            f"cannot contract {a_variance} with {b_variance} via the metric")
    if a_variance == "vector":
        g = metric.cov[node]
    elif a_variance == "covector":
        g = metric.contra[node]
    else:
        raise VarianceError(f"unknown variance {a_variance!r}")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(a @ g @ b)


def christoffels_from_metric_field(metric: MetricFieldOnD, *,
                                   order: int = 2) -> np.ndarray:
    """Christoffel symbols ``Gamma^k_ij`` of a tabulated metric.

    Metric derivatives come from :func:`grid_gradient` along each grid
    axis; output shape is ``grid.shape + (n, n, n)`` indexed ``[k, i, j]``
    with NaN wherever a needed derivative is unavailable.
    """
    grid = metric.grid
    n = metric.n
    geom = metric.valid
    D = np.empty(grid.shape + (n, n, n))  # [a, j, l] = d_a g_jl
    for j in range(n):
        for l in range(j, n):
            g = grid_gradient(metric.cov[..., j, l], grid, order=order, geom=geom)
            D[..., :, j, l] = g
            D[..., :, l, j] = g
    A = D + np.swapaxes(D, -3, -2) - np.moveaxis(D, -3, -1)
    return 0.5 * np.einsum("...kl,...ijl->...kij", metric.contra, A)


def project_semigeodesic(metric: MetricFieldOnD) -> MetricFieldOnD:
    """Force the block form ``g_nn = 1, g_an = 0`` (covariant) of the chart."""
    n = metric.n
    cov = metric.cov.copy()
    cov[..., n - 1, :] = 0.0
    cov[..., :, n - 1] = 0.0
    cov[..., n - 1, n - 1] = 1.0
    return MetricFieldOnD.from_covariant(metric.grid, cov, valid=metric.valid,
                                         mode=metric.mode)
