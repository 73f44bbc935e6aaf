"""The semigeodesic parameter grid and finite differences on it.

Reconstruction happens on a grid over ``D = {(y, t)}`` where ``y`` ranges
over a uniform (n-1)-dimensional boundary parameter grid and ``t`` is the
normal coordinate, sampled uniformly per boundary node up to a per-column
extent ``T(y)``.  Columns are ragged: arrays are stored on the rectangular
envelope ``boundary_shape + (nt,)`` with a validity mask derived from
``t_counts``.  The t axis is always the last axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre as npleg

from .errors import StencilError


@dataclass(frozen=True)
class DGrid:
    """Uniform boundary-parameter grid crossed with ragged t columns."""

    dy: tuple
    dt: float
    boundary_shape: tuple
    t_counts: np.ndarray
    periodic: tuple = field(default=None)

    def __post_init__(self):
        dy = tuple(float(v) for v in np.atleast_1d(self.dy))
        counts = np.asarray(self.t_counts, dtype=int)
        bshape = tuple(int(m) for m in self.boundary_shape)
        if counts.shape != bshape:
            raise StencilError("t_counts shape does not match boundary_shape")
        if np.any(counts < 1):
            raise StencilError("every column needs at least one t sample")
        per = self.periodic
        per = tuple(bool(p) for p in per) if per is not None else (False,) * len(dy)
        if len(per) != len(dy) or len(bshape) != len(dy):
            raise StencilError("dy, boundary_shape and periodic must agree")
        object.__setattr__(self, "dy", dy)
        object.__setattr__(self, "t_counts", counts)
        object.__setattr__(self, "boundary_shape", bshape)
        object.__setattr__(self, "periodic", per)

    @property
    def n(self) -> int:
        return len(self.dy) + 1

    @property
    def nt(self) -> int:
        return int(self.t_counts.max())

    @property
    def shape(self) -> tuple:
        return self.boundary_shape + (self.nt,)

    @property
    def spacings(self) -> tuple:
        return self.dy + (self.dt,)

    def t_values(self) -> np.ndarray:
        return self.dt * np.arange(self.nt)

    def extents(self) -> np.ndarray:
        """Per-column chart extent ``T(y) = (t_count - 1) * dt``."""
        return self.dt * (self.t_counts - 1)

    def valid_mask(self) -> np.ndarray:
        return np.arange(self.nt) < self.t_counts[..., None]

    def uniform(self) -> bool:
        return bool(np.all(self.t_counts == self.t_counts.flat[0]))


def _shift(values: np.ndarray, axis: int, offset: int, periodic: bool) -> np.ndarray:
    """values[..., i+offset, ...] with NaN (or wrapped) out-of-range fill."""
    if periodic:
        return np.roll(values, -offset, axis=axis)
    out = np.full_like(values, np.nan, dtype=float)
    m = values.shape[axis]
    if abs(offset) >= m:
        return out
    src = [slice(None)] * values.ndim
    dst = [slice(None)] * values.ndim
    if offset >= 0:
        src[axis] = slice(offset, m)
        dst[axis] = slice(0, m - offset)
    else:
        src[axis] = slice(0, m + offset)
        dst[axis] = slice(-offset, m)
    out[tuple(dst)] = values[tuple(src)]
    return out


# stencils as (offsets, coefficients*denominator, denominator); listed from
# least to most preferred within each order class
_STENCILS_2 = (
    ((-2, -1, 0), (1.0, -4.0, 3.0), 2.0),
    ((0, 1, 2), (-3.0, 4.0, -1.0), 2.0),
    ((-1, 1), (-1.0, 1.0), 2.0),
)
_STENCILS_4 = (
    ((-4, -3, -2, -1, 0), (3.0, -16.0, 36.0, -48.0, 25.0), 12.0),
    ((0, 1, 2, 3, 4), (-25.0, 48.0, -36.0, 16.0, -3.0), 12.0),
    ((-3, -2, -1, 0, 1), (-1.0, 6.0, -18.0, 10.0, 3.0), 12.0),
    ((-1, 0, 1, 2, 3), (-3.0, -10.0, 18.0, -6.0, 1.0), 12.0),
    ((-2, -1, 1, 2), (1.0, -8.0, 8.0, -1.0), 12.0),
)


def axis_derivative(values: np.ndarray, h: float, axis: int, *, order: int = 2,
                    periodic: bool = False, geom: np.ndarray = None,
                    data: np.ndarray = None) -> np.ndarray:
    """First derivative along ``axis`` with a deterministic stencil cascade.

    Stencil selection depends only on the geometric mask ``geom`` (grid
    shape, ragged columns), preferring the most centered stencil of the
    requested order that fits, then falling through to the order-2 family
    (central, then one-sided).  ``data`` marks coverage holes: any touched
    hole makes the result NaN rather than switching stencils, so missing
    measurements are never extrapolated over.
    """
    if order not in (2, 4):
        raise StencilError(f"unsupported derivative order {order}")
    values = np.asarray(values, dtype=float)
    if values.shape[axis] < 3:
        raise StencilError("need at least 3 nodes along a differencing axis")
    if geom is None:
        geom = np.ones(values.shape, dtype=bool)
    if data is None:
        data = geom
    masked = np.where(geom & data, values, np.nan)
    gnum = geom.astype(float)

    def val(off):
        return _shift(masked, axis, off, periodic)

    def ok(offs):
        avail = np.ones(values.shape, dtype=bool)
        for off in offs:
            if off:
                avail &= _shift(gnum, axis, off, periodic) == 1.0
        return avail

    out = np.full(values.shape, np.nan)
    plan = _STENCILS_2 if order == 2 else _STENCILS_2 + _STENCILS_4
    for offs, coefs, den in plan:
        acc = sum(c * val(o) for o, c in zip(offs, coefs)) / (den * h)
        out = np.where(ok(offs), acc, out)
    return np.where(geom, out, np.nan)


def grid_gradient(values: np.ndarray, grid: DGrid, *, order: int = 2,
                  geom: np.ndarray = None, data: np.ndarray = None) -> np.ndarray:
    """Gradient covector ``(d/dy^1, ..., d/dy^{n-1}, d/dt)`` per node.

    ``values`` lives on ``grid.shape`` (extra leading axes are not allowed;
    vectorize by calling per component).  Returns shape ``grid.shape + (n,)``
    with NaN at nodes where a component is not computable.
    """
    if values.shape != grid.shape:
        raise StencilError(f"field shape {values.shape} != grid {grid.shape}")
    if geom is None:
        geom = grid.valid_mask()
    comps = []
    nb = len(grid.boundary_shape)
    for a in range(nb):
        comps.append(axis_derivative(values, grid.dy[a], a, order=order,
                                     periodic=grid.periodic[a], geom=geom,
                                     data=data))
    comps.append(axis_derivative(values, grid.dt, nb, order=order,
                                 periodic=False, geom=geom, data=data))
    return np.stack(comps, axis=-1)


def third_difference(values: np.ndarray, axis: int, *, periodic: bool = False,
                     geom: np.ndarray = None, data: np.ndarray = None) -> np.ndarray:
    """Raw third difference along ``axis`` (approximately ``h^3 f'''``).

    Used to estimate finite-difference truncation error per node.  The four
    4-point windows are tried in a fixed order; nodes where none fits get
    NaN.
    """
    values = np.asarray(values, dtype=float)
    if geom is None:
        geom = np.ones(values.shape, dtype=bool)
    if data is None:
        data = geom
    masked = np.where(geom & data, values, np.nan)
    gnum = geom.astype(float)

    def val(off):
        return _shift(masked, axis, off, periodic)

    def ok(offs):
        avail = np.ones(values.shape, dtype=bool)
        for off in offs:
            avail &= _shift(gnum, axis, off, periodic) == 1.0
        return avail

    out = np.full(values.shape, np.nan)
    # windows ordered from most to least centered; first fit wins
    for offs in ((-2, -1, 0, 1), (-1, 0, 1, 2), (0, 1, 2, 3), (-3, -2, -1, 0)):
        window = (-val(offs[0]) + 3.0 * val(offs[1])
                  - 3.0 * val(offs[2]) + val(offs[3]))
        fresh = ok(offs) & np.isnan(out)
        out = np.where(fresh, window, out)
    return np.where(geom, out, np.nan)


def fifth_difference(values: np.ndarray, axis: int, *, periodic: bool = False,
                     geom: np.ndarray = None, data: np.ndarray = None) -> np.ndarray:
    """Raw fifth difference along ``axis`` (approximately ``h^5 f'''''``).

    Truncation-error proxy matched to the order-4 derivative stencils: the
    6-point windows contain every 5-point gradient window, so a kink seen
    by the derivative is always seen by the proxy.  Windows are tried most
    centered first; nodes where none fits get NaN.
    """
    values = np.asarray(values, dtype=float)
    if geom is None:
        geom = np.ones(values.shape, dtype=bool)
    if data is None:
        data = geom
    masked = np.where(geom & data, values, np.nan)
    gnum = geom.astype(float)

    def val(off):
        return _shift(masked, axis, off, periodic)

    def ok(offs):
        avail = np.ones(values.shape, dtype=bool)
        for off in offs:
            avail &= _shift(gnum, axis, off, periodic) == 1.0
        return avail

    coefs = (1.0, -5.0, 10.0, -10.0, 5.0, -1.0)
    out = np.full(values.shape, np.nan)
    for start in (-3, -2, -1, -4, 0, -5):
        offs = tuple(range(start, start + 6))
        window = sum(c * val(o) for o, c in zip(offs, coefs))
        fresh = ok(offs) & np.isnan(out)
        out = np.where(fresh, window, out)
    return np.where(geom, out, np.nan)


def polynomial_smooth(values: np.ndarray, degree: int, axis: int) -> np.ndarray:
    """Replace each line along ``axis`` with its least-squares Legendre fit.

    Independent per-node estimates carry uncorrelated noise from line to
    line; any derivative taken across them amplifies that noise by ``1/h``.
    Projecting onto a low-degree polynomial basis suppresses the incoherent
    part without the edge ringing a spectral cut-off would produce on
    non-periodic data.  NaN entries are ignored in the fit and stay NaN in
    the output; lines with fewer than ``degree + 1`` finite samples are
    returned unchanged.
    """
    if degree < 1:
        raise ValueError(f"smoothing degree must be >= 1, got {degree}")
    values = np.asarray(values, dtype=float)
    m = values.shape[axis]
    if m <= degree + 1:
        return values.copy()
    moved = np.moveaxis(values, axis, -1)
    flat = moved.reshape(-1, m)
    out = flat.copy()
    x = np.linspace(-1.0, 1.0, m)
    finite = np.isfinite(flat)
    for i in range(flat.shape[0]):
        mask = finite[i]
        if mask.sum() < degree + 1:
            continue
        if mask.all():
            coef = npleg.legfit(x, flat[i], degree)
            out[i] = npleg.legval(x, coef)
        else:
            coef = npleg.legfit(x[mask], flat[i, mask], degree)
            out[i, mask] = npleg.legval(x[mask], coef)
    return np.moveaxis(out.reshape(moved.shape), -1, axis)
