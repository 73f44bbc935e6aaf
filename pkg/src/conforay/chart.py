"""Boundary-normal chart construction by inward geodesic shooting.

Each boundary node launches a unit-speed geodesic along the metric inward
normal; the family ``gamma(y, t)`` is tabulated on a :class:`DGrid`.  A
column is truncated where the chart stops being a diffeomorphism, detected
by decay of ``det(d gamma / d y)`` relative to its boundary value and by
collision of adjacent geodesic columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boundary import BoundaryGeometry, inward_normal
from .errors import DegenerateBoundaryError
from .fields import ConformalFactorField
from .geodesics import shoot_batch
from .grids import DGrid, axis_derivative

JACOBIAN_THRESHOLD = 0.05


@dataclass
class NormalChart:
    grid: DGrid
    boundary: BoundaryGeometry
    positions: np.ndarray    # (*bshape, nt, n)
    velocities: np.ndarray   # (*bshape, nt, n)
    jac_dets: np.ndarray     # (*bshape, nt), NaN beyond columns
    truncated: np.ndarray    # (*bshape,) bool, True if cut by degeneration
    exited: np.ndarray       # (*bshape,) bool, True if the ray left the box

    def pullback_metric_cov(self, rho: ConformalFactorField,
                            order: int = 4) -> np.ndarray:
        """Ground-truth pulled-back covariant metric ``rho(gamma) J^T J``.

        Tangential Jacobian columns come from differencing the tabulated
        chart (``order`` selects the stencil); the t column is the exact
        shooting velocity.
        """
        J = self._jacobian(order=order)
        vals = np.where(self.grid.valid_mask(),
                        _masked_value(rho, self.positions), np.nan)
        return vals[..., None, None] * np.einsum("...ki,...kj->...ij", J, J)

    def _jacobian(self, order: int = 2, exact_t: bool = True) -> np.ndarray:
        """Per-node chart Jacobian ``J[..., k, i] = d gamma^k / d y^i``."""
        grid = self.grid
        n = grid.n
        geom = grid.valid_mask()
        J = np.full(grid.shape + (n, n), np.nan)
        for k in range(n):
            comp = self.positions[..., k]
            for a in range(n - 1):
                J[..., k, a] = axis_derivative(comp, grid.dy[a], a, order=order,
                                               periodic=grid.periodic[a],
                                               geom=geom)
            if exact_t:
                J[..., k, n - 1] = self.velocities[..., k]
            else:
                J[..., k, n - 1] = axis_derivative(comp, grid.dt, n - 1,
                                                   order=order, geom=geom)
        return J


def _masked_value(rho, pts):
    flat = pts.reshape(-1, pts.shape[-1])
    ok = np.all(np.isfinite(flat), axis=-1)
    out = np.full(flat.shape[0], np.nan)
    if np.any(ok):
        out[ok] = rho.value(flat[ok])
    return out.reshape(pts.shape[:-1])


def build_normal_chart(rho: ConformalFactorField, bg: BoundaryGeometry,
                       dt: float, t_max: float,
                       theta_j: float = JACOBIAN_THRESHOLD,
                       collide_frac: float = None) -> NormalChart:
    """Shoot the boundary-normal geodesic family and truncate degeneration.

    Columns are truncated at the first sample where the Jacobian
    determinant falls below ``theta_j`` times its own boundary value or
    where adjacent columns approach closer than ``collide_frac`` (default:
    ``theta_j``) times their boundary separation.
    """
    if collide_frac is None:
        collide_frac = theta_j
    bshape = bg.bshape
    num_steps = int(round(t_max / dt))
    nu = inward_normal(rho, bg).reshape(-1, bg.n)
    pts, vels, counts = shoot_batch(rho, bg.flat_points(), nu, dt, num_steps)
    nt = num_steps + 1
    positions = pts.reshape(bshape + (nt, bg.n))
    velocities = vels.reshape(bshape + (nt, bg.n))
    counts = counts.reshape(bshape)

    provisional = DGrid(bg.dy, dt, bshape, counts, bg.periodic)
    # the envelope already shrinks here when every column exits the box
    positions = positions[..., :provisional.nt, :]
    velocities = velocities[..., :provisional.nt, :]
    chart = NormalChart(provisional, bg, positions, velocities,
                        jac_dets=None, truncated=None, exited=None)
    J = chart._jacobian(order=2, exact_t=False)
    dets = np.linalg.det(np.where(np.isfinite(J), J, 0.0))
    dets = np.where(provisional.valid_mask(), dets, np.nan)

    det0 = dets[..., 0]
    scale = np.nanmax(np.abs(det0)) if det0.size else 0.0
    bad0 = ~np.isfinite(det0) | (np.abs(det0) <= 1e-12 * max(scale, 1e-300))
    if np.any(bad0):
        node = tuple(int(v) for v in np.argwhere(bad0)[0])
        raise DegenerateBoundaryError(
            f"chart Jacobian degenerate at t=0 for boundary node {node}")

    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.abs(dets) / np.abs(det0)[..., None]
    ratio = np.where(provisional.valid_mask(), ratio, 0.0)
    fail = ratio < theta_j
    fail |= _collision_fail(positions, provisional, collide_frac)
    fail[..., 0] = False  # the boundary layer always stands

    # first failing sample ends the column (exclusive)
    any_fail = fail.any(axis=-1)
    first_fail = np.where(any_fail, fail.argmax(axis=-1), nt)
    t_counts = np.minimum(counts, first_fail).astype(int)
    truncated = first_fail < counts
    exited = counts < nt

    grid = DGrid(bg.dy, dt, bshape, t_counts, bg.periodic)
    # the envelope shrinks when every column truncates early
    positions = positions[..., :grid.nt, :]
    velocities = velocities[..., :grid.nt, :]
    dets = dets[..., :grid.nt]
    mask = grid.valid_mask()
    positions = np.where(mask[..., None], positions, np.nan)
    velocities = np.where(mask[..., None], velocities, np.nan)
    dets = np.where(mask, dets, np.nan)
    return NormalChart(grid, bg, positions, velocities, dets, truncated, exited)


def _collision_fail(positions: np.ndarray, grid: DGrid,
                    collide_frac: float) -> np.ndarray:
    """True where an adjacent-column pair has closed below the threshold."""
    fail = np.zeros(grid.shape, dtype=bool)
    nb = len(grid.boundary_shape)
    for a in range(nb):
        if grid.boundary_shape[a] < 2:
            continue
        rolled = np.roll(positions, -1, axis=a)
        dist = np.linalg.norm(rolled - positions, axis=-1)
        if not grid.periodic[a]:
            sl = [slice(None)] * dist.ndim
            sl[a] = slice(-1, None)
            dist[tuple(sl)] = np.nan
        with np.errstate(invalid="ignore", divide="ignore"):
            pr = dist / dist[..., 0][..., None]
        pair_fail = np.isfinite(pr) & (pr < collide_frac)
        fail |= pair_fail
        fail |= np.roll(pair_fail, 1, axis=a)
    return fail
