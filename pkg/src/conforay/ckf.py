"""Conformal Killing operator and closed-form Euclidean Killing fields.

The closed-form fields serve as oracles for the operator discretization:
they satisfy the conformal Killing equation exactly, so any residual the
operator reports on them is pure discretization (or roundoff, for the
polynomial entries, since the stencils are exact on quadratics).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .grids import grid_gradient
from .metric import MetricFieldOnD, christoffels_from_metric_field


@dataclass
class EuclideanCKFParams:
    """Parameters of the n >= 2 family ``a0*x + A x - b|x|^2 + 2x(b.x) + c``."""

    a0: float = 0.0
    A: np.ndarray = None
    b: np.ndarray = None
    c: np.ndarray = None
    n: int = field(default=None)

    def __post_init__(self):
        if self.n is None:
            for arr in (self.A, self.b, self.c):
                if arr is not None:
                    self.n = np.asarray(arr).shape[-1]
                    break
            else:
                raise ParameterError("dimension undeterminable from parameters")
        n = self.n
        self.A = np.zeros((n, n)) if self.A is None else np.asarray(self.A, float)
        self.b = np.zeros(n) if self.b is None else np.asarray(self.b, float)
        self.c = np.zeros(n) if self.c is None else np.asarray(self.c, float)
        if self.A.shape != (n, n) or self.b.shape != (n,) or self.c.shape != (n,):
            raise ParameterError("parameter shapes inconsistent with dimension")
        scale = max(float(np.abs(self.A).max()), 1e-30)
        if np.abs(self.A + self.A.T).max() > 1e-12 * scale:
            raise ParameterError("A must be skew-symmetric")


def euclidean_ckf_eval(p: EuclideanCKFParams, x: np.ndarray) -> np.ndarray:
    """Contravariant Cartesian components of the field at point(s) ``x``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p.n:
        raise ParameterError(f"points have dimension {x.shape[-1]}, "
                             f"parameters {p.n}")
    bx = x @ p.b
    xx = np.sum(x * x, axis=-1)
    return (p.a0 * x + x @ p.A.T - p.b * xx[..., None]
            + 2.0 * x * bx[..., None] + p.c)


# n = 2 catalog; each entry is (Re f, Im f) for a holomorphic f, which is
# exactly the planar conformal Killing condition
CATALOG_2D = ("constant-x", "constant-y", "dilation", "rotation",
              "holomorphic-square", "holomorphic-exp")


def catalog_ckf_2d(kind: str, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 2:
        raise ParameterError("2-d catalog evaluated at non-planar points")
    x1, x2 = x[..., 0], x[..., 1]
    if kind == "constant-x":
        u1, u2 = np.ones_like(x1), np.zeros_like(x1)
    elif kind == "constant-y":
        u1, u2 = np.zeros_like(x1), np.ones_like(x1)
    elif kind == "dilation":
        u1, u2 = x1, x2
    elif kind == "rotation":
        u1, u2 = -x2, x1
    elif kind == "holomorphic-square":
        u1, u2 = x1 * x1 - x2 * x2, 2.0 * x1 * x2
    elif kind == "holomorphic-exp":
        u1, u2 = np.exp(x1) * np.cos(x2), np.exp(x1) * np.sin(x2)
    else:
        raise ParameterError(f"unknown catalog entry {kind!r}")
    return np.stack([u1, u2], axis=-1)


def cke_operator(metric: MetricFieldOnD, u: np.ndarray, *,
                 order: int = 2) -> np.ndarray:
    """Conformal Killing operator of a covector field on the grid.

    ``u`` has shape ``grid.shape + (n,)`` or ``grid.shape + (n, nf)`` for a
    family of fields.  The trace part is subtracted with the same discrete
    quantities, so the output is g-trace-free to roundoff by construction.
    """
    grid = metric.grid
    n = metric.n
    u = np.asarray(u, dtype=float)
    single = u.ndim == len(grid.shape) + 1
    if single:
        u = u[..., None]
    if u.shape[:-2] != grid.shape or u.shape[-2] != n:
        raise ValueError(f"covector field shape {u.shape} does not match "
                         f"grid {grid.shape}")
    nf = u.shape[-1]
    geom = metric.valid

    d = np.empty(grid.shape + (n, n, nf))  # [i, j, f] = d_i u_j
    for j in range(n):
        for f in range(nf):
            data = geom & np.isfinite(u[..., j, f])
            d[..., :, j, f] = grid_gradient(u[..., j, f], grid, order=order,
                                            geom=geom, data=data)
    gamma = christoffels_from_metric_field(metric, order=order)
    gu = np.einsum("...mij,...mf->...ijf", gamma, u)
    sym = 0.5 * (d + np.swapaxes(d, -3, -2))
    div = np.einsum("...kl,...klf->...f", metric.contra, d - gu)
    k = sym - gu - metric.cov[..., None] * div[..., None, None, :] / n
    return k[..., 0] if single else k
