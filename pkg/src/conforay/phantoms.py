"""Synthetic ground-truth conformal factors and boundary patches."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .boundary import (circle_arc_boundary, plane_patch_boundary,
                       segment_boundary, sphere_patch_boundary)
from .errors import ParameterError
from .fields import AnalyticConformalFactor, Box, GriddedConformalFactor

PHANTOM_KINDS = ("flat-constant", "gaussian-bump", "radial", "user-grid")
BOUNDARY_KINDS = ("segment", "circle-arc", "plane-patch", "sphere-patch")


@dataclass
class PhantomSpec:
    """Declarative phantom: conformal factor kind + boundary patch kind."""

    kind: str
    params: dict = field(default_factory=dict)
    boundary: dict = field(default_factory=dict)
    n: int = 2

    def build(self):
        return make_phantom_field(self), make_phantom_boundary(self)


def _default_box(n: int, params: dict) -> Box:
    lo = params.get("box_lo", [-0.75] * n)
    hi = params.get("box_hi", [1.75] * n)
    return Box(np.asarray(lo, float), np.asarray(hi, float))


def make_phantom_field(spec: PhantomSpec):
    p = dict(spec.params)
    n = spec.n
    box = _default_box(n, p)
    if spec.kind == "flat-constant":
        c = float(p.get("constant", 1.0))
        if c <= 0:
            raise ParameterError("constant level must be positive")
        return AnalyticConformalFactor(
            box,
            lambda x: np.full(np.asarray(x).shape[:-1], c),
            lambda x: np.zeros(np.asarray(x).shape),
            name="flat-constant", params={"constant": c})
    if spec.kind == "gaussian-bump":
        base = float(p.get("base", 1.0))
        amp = float(p.get("amplitude", 0.3))
        width2 = float(p.get("width2", 0.08))
        x0 = np.asarray(p.get("center", [0.5] * n), dtype=float)
        if base <= 0 or base + min(amp, 0.0) <= 0 or width2 <= 0:
            raise ParameterError("bump parameters give a non-positive field")

        def val(x):
            d2 = np.sum((np.asarray(x, float) - x0) ** 2, axis=-1)
            return base + amp * np.exp(-d2 / width2)

        def grad(x):
            x = np.asarray(x, float)
            d = x - x0
            e = amp * np.exp(-np.sum(d * d, axis=-1) / width2)
            return (-2.0 / width2) * d * e[..., None]

        return AnalyticConformalFactor(box, val, grad, name="gaussian-bump",
                                       params={"base": base, "amplitude": amp,
                                               "width2": width2,
                                               "center": x0.tolist()})
    if spec.kind == "radial":
        amp = float(p.get("amplitude", 1.0))
        beta = float(p.get("beta", 0.2))
        x0 = np.asarray(p.get("center", [0.0] * n), dtype=float)
        if amp <= 0 or beta < 0:
            raise ParameterError("radial profile must stay positive")

        def val(x):
            r2 = np.sum((np.asarray(x, float) - x0) ** 2, axis=-1)
            return amp / (1.0 + beta * r2) ** 2

        def grad(x):
            x = np.asarray(x, float)
            d = x - x0
            r2 = np.sum(d * d, axis=-1)
            f = -4.0 * amp * beta / (1.0 + beta * r2) ** 3
            return f[..., None] * d

        return AnalyticConformalFactor(box, val, grad, name="radial",
                                       params={"amplitude": amp, "beta": beta,
                                               "center": x0.tolist()})
    if spec.kind == "user-grid":
        values = np.asarray(p["values"], dtype=float)
        return GriddedConformalFactor(box, values, name="user-grid")
    raise ParameterError(f"unknown phantom kind {spec.kind!r}")


def make_phantom_boundary(spec: PhantomSpec):
    b = dict(spec.boundary)
    kind = b.pop("kind", "segment" if spec.n == 2 else "plane-patch")
    if kind == "segment":
        return segment_boundary(b.get("p0", (0.0, 0.0)), b.get("p1", (1.0, 0.0)),
                                int(b.get("num", 64)),
                                normal_side=b.get("normal_side", "left"))
    if kind == "circle-arc":
        return circle_arc_boundary(
            b.get("center", (0.0, 0.0)), float(b.get("radius", 1.0)),
            int(b.get("num", 64)), theta0=float(b.get("theta0", 0.0)),
            theta1=float(b.get("theta1", 2.0 * np.pi)),
            periodic=bool(b.get("periodic", True)),
            parametrization=b.get("parametrization", "arclength"))
    if kind == "plane-patch":
        return plane_patch_boundary(
            b.get("origin", (0.0, 0.0, 0.0)), b.get("e1", (1.0, 0.0, 0.0)),
            b.get("e2", (0.0, 1.0, 0.0)), b.get("extents", (1.0, 1.0)),
            b.get("counts", (16, 16)), normal_sign=float(b.get("normal_sign", 1.0)))
    if kind == "sphere-patch":
        return sphere_patch_boundary(
            b.get("center", (0.0, 0.0, 0.0)), float(b.get("radius", 1.0)),
            b.get("theta_range", (0.6, 2.5)), b.get("phi_range", (0.0, 1.9)),
            b.get("counts", (12, 12)))
    raise ParameterError(f"unknown boundary kind {kind!r}")
