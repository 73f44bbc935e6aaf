"""Cauchy march for the conformal Killing system and final reconstruction.

In semigeodesic form (g_nn = 1, g_an = 0) the normal components of Ku = 0
isolate the t-derivatives:

    d_t u_a = -d_a u_n + 2 Gamma^k_an u_k
    d_t u_n = (1/(n-1)) g^{ab} (d_a u_b - Gamma^k_ab u_k)

which march the boundary Cauchy data into the domain layer by layer; the
tangential components K_ab are monitored as constraints.  For n = 2 this
Cauchy problem is elliptic (conjugate harmonic functions), so high spatial
modes of any data error grow like exp(k t); the optional per-layer spectral
projection bounds the growing band, and a hard residual guard turns runaway
growth into an error instead of a silent wrong answer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .boundary import BoundaryGeometry
from .ckf import cke_operator
from .errors import (DegenerateSpeedError, GeometryError,
                     MarchDivergenceError)
from .grids import axis_derivative, grid_gradient
from .metric import MetricFieldOnD, christoffels_from_metric_field
from .recovery import BoundaryRhoTrace

EPS_V = 1e-8
OVERFLOW_FACTOR = 1e15


def assemble_cauchy_data(rho_trace: BoundaryRhoTrace,
                         bg: BoundaryGeometry) -> np.ndarray:
    """Boundary-layer covector family u^(j)(x',0), shape (*bshape, n, n).

    Component axis first (tangential components then normal), field index j
    last.  Tangential: rho * dx'^j/dy^a from the stored parametrization
    tangents; normal: sqrt(rho) * nu0^j.
    """
    n = bg.n
    rho = np.asarray(rho_trace.rho, dtype=float)
    if rho.shape != bg.bshape:
        raise GeometryError(f"boundary rho shape {rho.shape} does not match "
                            f"geometry {bg.bshape}")
    u0 = np.empty(bg.bshape + (n, n))
    u0[..., :n - 1, :] = rho[..., None, None] * bg.tangents
    u0[..., n - 1, :] = np.sqrt(rho)[..., None] * bg.normals
    return u0


def _mode_gains(num_modes: int, cutoff: float) -> np.ndarray:
    """Low-pass gain profile: unit passband, raised-cosine rolloff, zero top.

    The rolloff spans one passband width above the cutoff index.  A sharp
    truncation would ring at non-periodic edges, and the march's layer-wise
    time differences amplify that ringing by 1/dt; the taper trades it for
    mild leakage of modes whose growth the repeated per-step application
    still suppresses geometrically.
    """
    keep = max(1, int(np.ceil(cutoff * num_modes)))
    stop = min(num_modes, 2 * keep)
    j = np.arange(num_modes, dtype=float)
    gains = np.zeros(num_modes)
    gains[:keep] = 1.0
    if stop > keep:
        ramp = (j[keep:stop] - keep) / (stop - keep)
        gains[keep:stop] = np.cos(0.5 * np.pi * ramp) ** 2
    return gains


def spectral_project(values: np.ndarray, cutoff: float, axis: int,
                     periodic: bool) -> np.ndarray:
    """Tapered low-pass filter along one axis.

    ``cutoff`` is the fraction of the axis' mode count kept at unit gain;
    see ``_mode_gains`` for the rolloff.  Non-periodic axes use the type-II
    cosine basis, periodic ones the Fourier basis.  Non-finite entries are
    zero-filled for the transform and restored after.
    """
    if not 0 < cutoff <= 1:
        raise ValueError(f"cutoff must lie in (0, 1], got {cutoff}")
    bad = ~np.isfinite(values)
    work = np.where(bad, 0.0, values)
    m = values.shape[axis]
    shape = [1] * values.ndim
    if periodic:
        coef = np.fft.rfft(work, axis=axis)
        shape[axis] = coef.shape[axis]
        coef *= _mode_gains(coef.shape[axis], cutoff).reshape(shape)
        out = np.fft.irfft(coef, n=m, axis=axis)
    else:
        coef = scipy.fft.dct(work, type=2, axis=axis, norm="ortho")
        shape[axis] = m
        coef *= _mode_gains(m, cutoff).reshape(shape)
        out = scipy.fft.idct(coef, type=2, axis=axis, norm="ortho")
    return np.where(bad, np.nan, out)


@dataclass
class CovectorFamilyOnD:
    """Marched covector family u^(j)_i on the D grid.

    ``values`` has shape ``(*bshape, nt, n, n)``: component index i, then
    field index j.  ``layer_residuals[k]`` is the max |K_ab| constraint
    residual over layer k.
    """

    grid: object
    values: np.ndarray
    layer_residuals: np.ndarray
    eps_k: float
    smooth_cutoff: float = None
    meta: dict = field(default_factory=dict)


def _march_rhs(u, gamma_l, contra_ab, geom, dy, periodic, n):
    """Evolution right-hand side on one layer; u is (*bshape, n, nf)."""
    nf = u.shape[-1]
    geom_b = np.broadcast_to(geom[..., None, None], u.shape)
    data = geom_b & np.isfinite(u)
    d = np.empty(u.shape[:-2] + (n - 1,) + u.shape[-2:])  # [a, i, f]
    masked = np.where(data, u, np.nan)
    for a in range(n - 1):
        d[..., a, :, :] = axis_derivative(masked, dy[a], a, order=2,
                                          periodic=periodic[a], geom=geom_b,
                                          data=data)
    rhs = np.empty_like(u)
    # d_t u_a = -d_a u_n + 2 Gamma^m_an u_m
    rhs[..., :n - 1, :] = (-d[..., :, n - 1, :]
                           + 2.0 * np.einsum("...ma,...mf->...af",
                                             gamma_l[..., :, :n - 1, n - 1],
                                             u))
    # d_t u_n = (1/(n-1)) g^{ab} (d_a u_b - Gamma^m_ab u_m)
    inner = d[..., :, :n - 1, :] - np.einsum("...mab,...mf->...abf",
                                             gamma_l[..., :, :n - 1, :n - 1],
                                             u)
    rhs[..., n - 1, :] = np.einsum("...ab,...abf->...f",
                                   contra_ab, inner) / (n - 1)
    return rhs


def cke_march(metric: MetricFieldOnD, cauchy: np.ndarray, *,
              smooth_cutoff: float = None, eps_k: float = None,
              order: int = 2) -> CovectorFamilyOnD:
    """March the Cauchy data through D along the t direction.

    Four-stage explicit integration per layer, metric coefficients averaged
    between adjacent layers for the half steps.  Layer 0 is stored exactly
    as given.  After the march the full conformal Killing operator is
    evaluated once; any monitored layer whose tangential residual exceeds
    ``eps_k`` (default ``10x the first monitored layer + 1e-3``) raises a
    divergence error.

    The monitor is evaluated with the same finite differences that define
    the discrete operator, so nodes that only admit one-sided stencils
    (first/last t layer, edge columns of a non-periodic tangential axis)
    measure extrapolation error rather than march error; the per-layer
    maximum therefore runs over the centrally-differenced interior, and the
    guard skips the first and last layer.  The trimmed window is recorded
    in ``meta["monitor_layers"]``.
    """
    grid = metric.grid
    n = metric.n
    bshape = grid.boundary_shape
    nt = grid.nt
    dt = grid.dt
    if cauchy.shape != bshape + (n, n):
        raise GeometryError(f"cauchy data shape {cauchy.shape} does not "
                            f"match boundary layer {bshape + (n, n)}")
    gamma = christoffels_from_metric_field(metric, order=order)
    valid = grid.valid_mask()

    u = np.full(bshape + (nt, n, n), np.nan)
    u[..., 0, :, :] = cauchy
    scale0 = float(np.nanmax(np.abs(cauchy)))
    limit = OVERFLOW_FACTOR * max(scale0, 1.0)

    for k in range(nt - 1):
        target = valid[..., k + 1]
        if not np.any(target):
            break
        geom_k = valid[..., k]
        g_k = gamma[..., k, :, :, :]
        g_k1 = gamma[..., k + 1, :, :, :]
        g_half = 0.5 * (g_k + g_k1)
        c_k = metric.contra[..., k, :n - 1, :n - 1]
        c_k1 = metric.contra[..., k + 1, :n - 1, :n - 1]
        c_half = 0.5 * (c_k + c_k1)

        uk = u[..., k, :, :]
        f1 = _march_rhs(uk, g_k, c_k, geom_k, grid.dy, grid.periodic, n)
        f2 = _march_rhs(uk + 0.5 * dt * f1, g_half, c_half, geom_k,
                        grid.dy, grid.periodic, n)
        f3 = _march_rhs(uk + 0.5 * dt * f2, g_half, c_half, geom_k,
                        grid.dy, grid.periodic, n)
        f4 = _march_rhs(uk + dt * f3, g_k1, c_k1, geom_k,
                        grid.dy, grid.periodic, n)
        unext = uk + dt / 6.0 * (f1 + 2.0 * f2 + 2.0 * f3 + f4)
        if smooth_cutoff is not None:
            for a in range(n - 1):
                unext = spectral_project(unext, smooth_cutoff, a,
                                         grid.periodic[a])
        unext = np.where(target[..., None, None], unext, np.nan)
        finite = np.isfinite(unext)
        if np.any(np.abs(unext[finite]) > limit) or np.any(np.isinf(unext)):
            raise MarchDivergenceError(
                f"marched field overflowed at layer {k + 1}", layer=k + 1)
        u[..., k + 1, :, :] = unext

    ku = cke_operator(metric, u, order=order)
    kab = np.abs(ku[..., :n - 1, :n - 1, :])
    kab = np.where(valid[..., None, None, None], kab, np.nan)
    interior = np.ones(bshape, dtype=bool)
    for a in range(n - 1):
        if grid.periodic[a] or bshape[a] <= 2:
            continue
        sl = [slice(None)] * (n - 1)
        for edge in (slice(0, 1), slice(-1, None)):
            sl[a] = edge
            interior[tuple(sl)] = False
    kab = np.where(interior[..., None, None, None, None], kab, np.nan)
    flat = kab.reshape(-1, nt, (n - 1) * (n - 1) * n)
    residuals = np.full(nt, np.nan)
    for k in range(nt):
        layer = flat[:, k, :]
        if np.any(np.isfinite(layer)):
            residuals[k] = np.nanmax(layer)
    lo_k, hi_k = (1, nt - 2) if nt > 3 else (0, nt - 1)
    window = residuals[lo_k:hi_k + 1]
    r0 = window[np.isfinite(window)][0] if np.any(np.isfinite(window)) else 0.0
    if eps_k is None:
        eps_k = 10.0 * r0 + 1e-3
    over = np.where(np.isfinite(window) & (window > eps_k))[0]
    if over.size:
        k_bad = int(over[0]) + lo_k
        raise MarchDivergenceError(
            f"constraint residual {residuals[k_bad]:.3e} exceeds guard "
            f"{eps_k:.3e} at layer {k_bad}", layer=k_bad,
            residual=float(residuals[k_bad]))
    return CovectorFamilyOnD(grid=grid, values=u, layer_residuals=residuals,
                             eps_k=float(eps_k), smooth_cutoff=smooth_cutoff,
                             meta={"monitor_layers": (lo_k, hi_k)})


@dataclass
class ReconstructionResult:
    """Final outputs: the isometry samples and the recovered factor."""

    family: CovectorFamilyOnD
    v: np.ndarray             # (*bshape, nt, n) recovered v = rho(gamma) gamma'
    gamma: np.ndarray         # (*bshape, nt, n) Cartesian positions
    rho_on_gamma: np.ndarray  # (*bshape, nt) = |v|^2
    jac_dets: np.ndarray      # (*bshape, nt)
    valid: np.ndarray         # (*bshape, nt) nodes carrying results
    min_speed2: float
    layer_residuals: np.ndarray


def reconstruct_gamma_rho(family: CovectorFamilyOnD, bg: BoundaryGeometry, *,
                          eps_v: float = EPS_V) -> ReconstructionResult:
    """Integrate gamma' = v/|v|^2 down each column and read rho off |v|^2."""
    grid = family.grid
    n = bg.n
    geom = grid.valid_mask()
    v = family.values[..., n - 1, :]
    speed2 = np.sum(v * v, axis=-1)
    finite = geom & np.all(np.isfinite(v), axis=-1)
    low = finite & (speed2 < eps_v)
    if np.any(low):
        node = tuple(int(i) for i in np.argwhere(low)[0])
        raise DegenerateSpeedError(
            f"|v|^2 = {speed2[node]:.3e} < {eps_v:.1e} at node {node}")
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(finite[..., None], v / np.where(
            speed2 > 0, speed2, np.nan)[..., None], np.nan)

    gamma = np.full(v.shape, np.nan)
    gamma[..., 0, :] = bg.points
    for k in range(1, grid.nt):
        gamma[..., k, :] = gamma[..., k - 1, :] + 0.5 * grid.dt * (
            w[..., k - 1, :] + w[..., k, :])

    rho_g = np.where(finite, speed2, np.nan)
    gvalid = np.all(np.isfinite(gamma), axis=-1) & geom

    jac = np.full(grid.shape, np.nan)
    cols = np.empty(grid.shape + (n, n))
    for j in range(n):
        g = grid_gradient(gamma[..., j], grid, order=2, geom=gvalid)
        cols[..., j, :n - 1] = g[..., :n - 1]
        cols[..., j, n - 1] = w[..., j]
    ok = np.all(np.isfinite(cols), axis=(-2, -1))
    jac[ok] = np.linalg.det(cols[ok])

    return ReconstructionResult(
        family=family, v=v, gamma=gamma, rho_on_gamma=rho_g, jac_dets=jac,
        valid=gvalid, min_speed2=float(np.nanmin(np.where(finite, speed2,
                                                          np.nan))),
        layer_residuals=family.layer_residuals)
