"""Boundary hypersurface geometry and its standard constructors.

A boundary patch is a uniform parameter grid ``y`` mapped to Cartesian
points ``x'(y)`` with per-node Euclidean inward unit normals and tangent
vectors ``dx'/dy^a``.  The metric inward normal is obtained from these via
:func:`inward_normal`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError
from .fields import ConformalFactorField

_ORTHO_TOL = 1e-8


@dataclass(frozen=True)
class BoundaryGeometry:
    points: np.ndarray     # (*bshape, n)
    normals: np.ndarray    # (*bshape, n), Euclidean unit, inward
    tangents: np.ndarray   # (*bshape, n-1, n)
    dy: tuple
    periodic: tuple

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        nrm = np.asarray(self.normals, dtype=float)
        tan = np.asarray(self.tangents, dtype=float)
        n = pts.shape[-1]
        bshape = pts.shape[:-1]
        if nrm.shape != pts.shape or tan.shape != bshape + (n - 1, n):
            raise GeometryError("inconsistent boundary array shapes")
        if len(bshape) != n - 1:
            raise GeometryError("boundary parameter grid must have n-1 axes")
        lens = np.linalg.norm(nrm, axis=-1)
        if np.any(np.abs(lens - 1.0) > _ORTHO_TOL):
            raise GeometryError("inward normals must be Euclidean unit vectors")
        tan_scale = np.linalg.norm(tan, axis=-1)
        if np.any(tan_scale <= 0):
            raise GeometryError("degenerate (zero) boundary tangent")
        dots = np.abs(np.einsum("...j,...aj->...a", nrm, tan)) / tan_scale
        if np.any(dots > _ORTHO_TOL):
            raise GeometryError("normals are not orthogonal to the tangents")
        gram = np.einsum("...aj,...bj->...ab", tan, tan)
        if np.any(np.linalg.det(gram) <= 1e-12 * np.prod(tan_scale, axis=-1) ** 2):
            raise GeometryError("boundary tangents are linearly dependent")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "normals", nrm)
        object.__setattr__(self, "tangents", tan)
        object.__setattr__(self, "dy", tuple(float(v) for v in self.dy))
        object.__setattr__(self, "periodic", tuple(bool(p) for p in self.periodic))

    @property
    def n(self) -> int:
        return self.points.shape[-1]

    @property
    def bshape(self) -> tuple:
        return self.points.shape[:-1]

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.bshape))

    def flat_points(self) -> np.ndarray:
        return self.points.reshape(-1, self.n)


def inward_normal(rho: ConformalFactorField, bg: BoundaryGeometry) -> np.ndarray:
    """Metric unit inward normal ``nu = nu_0 / sqrt(rho)`` per boundary node."""
    scale = np.sqrt(rho.value(bg.points))
    return bg.normals / scale[..., None]


def segment_boundary(p0, p1, num: int, normal_side: str = "left") -> BoundaryGeometry:
    """Straight 2D boundary segment parametrized by Euclidean arclength."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    if p0.shape != (2,) or p1.shape != (2,):
        raise GeometryError("segment endpoints must be 2D points")
    if num < 3:
        raise GeometryError("segment needs at least 3 nodes")
    length = float(np.linalg.norm(p1 - p0))
    if length <= 0:
        raise GeometryError("segment endpoints coincide")
    direction = (p1 - p0) / length
    if normal_side == "left":
        nrm = np.array([-direction[1], direction[0]])
    elif normal_side == "right":
        nrm = np.array([direction[1], -direction[0]])
    else:
        raise GeometryError(f"unknown normal side {normal_side!r}")
    s = np.linspace(0.0, length, num)
    pts = p0 + s[:, None] * direction
    normals = np.broadcast_to(nrm, (num, 2)).copy()
    tangents = np.broadcast_to(direction, (num, 1, 2)).copy()
    return BoundaryGeometry(pts, normals, tangents, (length / (num - 1),), (False,))


def circle_arc_boundary(center, radius: float, num: int, *, theta0: float = 0.0,
                        theta1: float = 2.0 * np.pi, periodic: bool = None,
                        parametrization: str = "arclength") -> BoundaryGeometry:
    """Circular 2D boundary arc with the inward normal toward the center."""
    center = np.asarray(center, dtype=float)
    if radius <= 0:
        raise GeometryError("circle radius must be positive")
    full = abs((theta1 - theta0) - 2.0 * np.pi) < 1e-12
    if periodic is None:
        periodic = full
    if periodic and not full:
        raise GeometryError("periodic arcs must span exactly 2*pi")
    if num < 3:
        raise GeometryError("arc needs at least 3 nodes")
    if periodic:
        theta = theta0 + (theta1 - theta0) * np.arange(num) / num
        dtheta = (theta1 - theta0) / num
    else:
        theta = np.linspace(theta0, theta1, num)
        dtheta = (theta1 - theta0) / (num - 1)
    radial = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    pts = center + radius * radial
    normals = -radial
    unit_tan = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)
    if parametrization == "arclength":
        tangents = unit_tan[:, None, :]
        dy = radius * dtheta
    elif parametrization == "angle":
        tangents = radius * unit_tan[:, None, :]
        dy = dtheta
    else:
        raise GeometryError(f"unknown parametrization {parametrization!r}")
    return BoundaryGeometry(pts, normals, tangents, (dy,), (bool(periodic),))


def plane_patch_boundary(origin, e1, e2, extents, counts,
                         normal_sign: float = 1.0) -> BoundaryGeometry:
    """Flat rectangular 3D boundary patch spanned by unit directions e1, e2."""
    origin = np.asarray(origin, dtype=float)
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    for e in (e1, e2):
        if abs(np.linalg.norm(e) - 1.0) > 1e-12:
            raise GeometryError("patch directions must be unit vectors")
    if abs(e1 @ e2) > 1e-12:
        raise GeometryError("patch directions must be orthogonal")
    m1, m2 = (int(c) for c in counts)
    if m1 < 3 or m2 < 3:
        raise GeometryError("patch needs at least 3 nodes per axis")
    l1, l2 = (float(v) for v in extents)
    y1 = np.linspace(0.0, l1, m1)
    y2 = np.linspace(0.0, l2, m2)
    pts = (origin + y1[:, None, None] * e1 + y2[None, :, None] * e2)
    nrm = np.cross(e1, e2) * float(normal_sign)
    normals = np.broadcast_to(nrm, (m1, m2, 3)).copy()
    tangents = np.empty((m1, m2, 2, 3))
    tangents[..., 0, :] = e1
    tangents[..., 1, :] = e2
    return BoundaryGeometry(pts, normals, tangents,
                            (l1 / (m1 - 1), l2 / (m2 - 1)), (False, False))


def sphere_patch_boundary(center, radius: float, theta_range, phi_range,
                          counts) -> BoundaryGeometry:
    """Patch of a sphere (azimuth theta, polar phi), inward normal to center."""
    center = np.asarray(center, dtype=float)
    if radius <= 0:
        raise GeometryError("sphere radius must be positive")
    m1, m2 = (int(c) for c in counts)
    theta = np.linspace(theta_range[0], theta_range[1], m1)
    phi = np.linspace(phi_range[0], phi_range[1], m2)
    if np.any(np.sin(phi) < 1e-6):
        raise GeometryError("sphere patch may not touch the poles")
    th = theta[:, None]
    ph = phi[None, :]
    radial = np.stack([np.sin(ph) * np.cos(th) + 0 * th,
                       np.sin(ph) * np.sin(th) + 0 * th,
                       np.cos(ph) + 0 * th], axis=-1)
    pts = center + radius * radial
    normals = -radial
    # parameters are arclength-scaled angles: y1 = r*theta, y2 = r*phi
    d_theta = np.stack([-np.sin(ph) * np.sin(th), np.sin(ph) * np.cos(th),
                        0 * (th + ph)], axis=-1)
    d_phi = np.stack([np.cos(ph) * np.cos(th), np.cos(ph) * np.sin(th),
                      -np.sin(ph) + 0 * th], axis=-1)
    tangents = np.stack([d_theta, d_phi], axis=-2)
    dy1 = radius * (theta[1] - theta[0])
    dy2 = radius * (phi[1] - phi[0])
    return BoundaryGeometry(pts, normals, tangents, (dy1, dy2), (False, False))
