"""Unit-speed geodesic integration for conformally Euclidean metrics.

For ``g = rho * dx^2`` the geodesic equation reduces to

    x'' = (|x'|^2 grad(rho) - 2 (grad(rho) . x') x') / (2 rho)

and unit speed means ``rho(x) |x'|^2 = 1``.  Integration is classical
fixed-step RK4.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SpeedError
from .fields import ConformalFactorField

SPEED_TOL = 1e-10


@dataclass
class GeodesicPath:
    times: np.ndarray       # (m,)
    points: np.ndarray      # (m, n)
    velocities: np.ndarray  # (m, n)
    exited: bool
    drift: float            # max |rho |x'|^2 - 1| along the path


def _accel(rho: ConformalFactorField, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
    val = rho._value(x)
    grad = rho._gradient(x)
    dot = np.einsum("...k,...k->...", grad, xi)
    speed2 = np.einsum("...k,...k->...", xi, xi)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (speed2[..., None] * grad - 2.0 * dot[..., None] * xi) / (
            2.0 * val[..., None])


def _rk4_step(rho, x, xi, dt):
    k1x, k1v = xi, _accel(rho, x, xi)
    k2x = xi + 0.5 * dt * k1v
    k2v = _accel(rho, x + 0.5 * dt * k1x, k2x)
    k3x = xi + 0.5 * dt * k2v
    k3v = _accel(rho, x + 0.5 * dt * k2x, k3x)
    k4x = xi + dt * k3v
    k4v = _accel(rho, x + dt * k3x, k4x)
    xn = x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    vn = xi + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return xn, vn


def shoot_batch(rho: ConformalFactorField, x0: np.ndarray, xi0: np.ndarray,
                dt: float, num_steps: int):
    """Integrate a batch of geodesics for ``num_steps`` fixed RK4 steps.

    Columns that leave the field's box (or hit an invalid state) are frozen
    at their last valid sample.  Returns ``(points, velocities, counts)``
    where ``counts[i]`` is the number of valid samples of column ``i``
    (including t = 0).
    """
    x = np.array(x0, dtype=float)
    xi = np.array(xi0, dtype=float)
    m, n = x.shape
    nt = num_steps + 1
    points = np.full((m, nt, n), np.nan)
    velocities = np.full((m, nt, n), np.nan)
    points[:, 0] = x
    velocities[:, 0] = xi
    counts = np.ones(m, dtype=int)
    alive = rho.box.contains(x)
    if not np.all(alive):
        raise SpeedError("geodesic launch points must lie inside the box")
    for k in range(1, nt):
        if not np.any(alive):
            break
        xn, vn = _rk4_step(rho, x, xi, dt)
        good = alive & np.all(np.isfinite(xn), axis=-1) & rho.box.contains(xn)
        x = np.where(good[:, None], xn, x)
        xi = np.where(good[:, None], vn, xi)
        points[good, k] = x[good]
        velocities[good, k] = xi[good]
        counts[good] = k + 1
        alive = good
    return points, velocities, counts


def geodesic_shoot(rho: ConformalFactorField, x0, xi0, dt: float,
                   t_max: float, speed_tol: float = SPEED_TOL) -> GeodesicPath:
    """Shoot a single unit-speed geodesic from ``x0`` with velocity ``xi0``.

    Raises :class:`SpeedError` unless ``rho(x0) |xi0|^2 = 1`` within
    ``speed_tol``.  Integration stops at ``t_max`` or when the path leaves
    the field's bounding box (then ``exited`` is set).
    """
    x0 = np.asarray(x0, dtype=float)
    xi0 = np.asarray(xi0, dtype=float)
    speed = float(rho.value(x0) * (xi0 @ xi0))
    if abs(speed - 1.0) > speed_tol:
        raise SpeedError(f"initial speed violates unit-speed relation: "
                         f"rho |xi|^2 = {speed!r}")
    num_steps = int(round(t_max / dt))
    pts, vels, counts = shoot_batch(rho, x0[None, :], xi0[None, :], dt, num_steps)
    m = int(counts[0])
    pts = pts[0, :m]
    vels = vels[0, :m]
    times = dt * np.arange(m)
    vals = rho.value(pts)
    drift = float(np.abs(vals * np.einsum("ij,ij->i", vels, vels) - 1.0).max())
    return GeodesicPath(times, pts, vels, exited=m < num_steps + 1, drift=drift)
