"""Conformal factor fields and their Christoffel symbols.

The pipeline works with metrics of the form ``g_ij(x) = rho(x) * delta_ij``
on a box in Cartesian coordinates.  A field object provides ``rho`` and its
spatial gradient, either from closed-form expressions or from gridded
samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PositivityError
from .interp import multilinear_sample

_BOX_TOL = 1e-9


@dataclass(frozen=True)
class Box:
    """Axis-aligned bounding box; ``lo``/``hi`` are length-n arrays."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise DomainError(f"invalid box: lo={lo}, hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def n(self) -> int:
        return self.lo.size

    def contains(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        tol = _BOX_TOL * np.maximum(1.0, np.abs(self.hi - self.lo))
        return np.all((x >= self.lo - tol) & (x <= self.hi + tol), axis=-1)

    def require(self, x: np.ndarray) -> None:
        inside = self.contains(x)
        if not np.all(inside):
            bad = np.asarray(x, dtype=float)[~inside]
            raise DomainError(f"point {bad.reshape(-1, self.n)[0]} outside box "
                              f"[{self.lo}, {self.hi}]")


class ConformalFactorField:
    """Strictly positive scalar field rho with gradient access.

    Subclasses implement ``_value`` and ``_gradient`` on arrays of points
    shaped ``(..., n)``.  Public accessors validate the domain and
    positivity.
    """

    def __init__(self, box: Box):
        self.box = box
        self.n = box.n

    def value(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        self.box.require(x)
        v = self._value(x)
        if np.any(v <= 0.0) or not np.all(np.isfinite(v)):
            raise PositivityError("conformal factor must be strictly positive")
        return v

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        self.box.require(x)
        return self._gradient(x)

    def sqrt_value(self, x: np.ndarray) -> np.ndarray:
        return np.sqrt(self.value(x))

    def _value(self, x):  # pragma: no cover - abstract
        raise NotImplementedError

    def _gradient(self, x):  # pragma: no cover - abstract
        raise NotImplementedError


class AnalyticConformalFactor(ConformalFactorField):
    """Field given by vectorized closed-form callables."""

    def __init__(self, box: Box, value_fn, gradient_fn, name: str = "analytic",
                 params: dict | None = None):
        super().__init__(box)
        self._value_fn = value_fn
        self._gradient_fn = gradient_fn
        self.name = name
        self.params = dict(params or {})

    def _value(self, x):
        return np.asarray(self._value_fn(x), dtype=float)

    def _gradient(self, x):
        return np.asarray(self._gradient_fn(x), dtype=float)


class GriddedConformalFactor(ConformalFactorField):
    """Field sampled on a uniform node grid over its box.

    Values are interpolated multilinearly.  Gradients are central
    differences of the node values (one-sided on the faces), themselves
    interpolated multilinearly, which keeps them continuous and second-order
    accurate; differentiating the interpolant directly would only be
    first-order away from cell centers.
    """

    def __init__(self, box: Box, values: np.ndarray, name: str = "gridded"):
        super().__init__(box)
        values = np.asarray(values, dtype=float)
        if values.ndim != box.n:
            raise DomainError("gridded values dimensionality does not match box")
        if np.any(np.array(values.shape) < 3):
            raise DomainError("gridded field needs at least 3 nodes per axis")
        if np.any(values <= 0) or not np.all(np.isfinite(values)):
            raise PositivityError("gridded conformal factor must be positive")
        self.values = values
        self.name = name
        self.h = (box.hi - box.lo) / (np.array(values.shape) - 1)
        self._node_grads = np.stack(
            np.gradient(values, *self.h, edge_order=2), axis=-1)

    def _value(self, x):
        return multilinear_sample(self.values, self.box.lo, self.h, x)

    def _gradient(self, x):
        comps = [multilinear_sample(self._node_grads[..., a], self.box.lo,
                                    self.h, x)
                 for a in range(self.n)]
        return np.stack(comps, axis=-1)


def conformal_christoffel(rho: ConformalFactorField, x: np.ndarray) -> np.ndarray:
    """Christoffel symbols of ``g = rho * dx^2`` at points ``x``.

    Returns an array shaped ``(..., n, n, n)`` indexed ``[k, i, j]`` with

        Gamma^k_ij = (d_i rho * delta^k_j + d_j rho * delta^k_i
                      - d_k rho * delta_ij) / (2 rho)

    which is symmetric in ``(i, j)`` and satisfies the trace identity
    ``Gamma^k_ik = (n/2) d_i log rho``.
    """
    x = np.asarray(x, dtype=float)
    n = rho.n
    g = rho.gradient(x) / (2.0 * rho.value(x))[..., None]  # (..., n)
    eye = np.eye(n)
    gamma = (np.einsum("ki,...j->...kij", eye, g)
             + np.einsum("kj,...i->...kij", eye, g)
             - np.einsum("ij,...k->...kij", eye, g))
    return gamma
