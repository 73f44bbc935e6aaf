"""Metric recovery from a travel-time dataset.

Each stored travel time obeys ``g~^{ij} d_i lam d_j lam = 1`` in chart
coordinates, which is linear in the contravariant components.  Per node we
assemble one equation per covered source and solve a weighted least-squares
system.

Gradients are taken from the squared table via ``d lam = d(lam^2) / (2 lam)``:
the squared travel time stays smooth across the source vertex where lam
itself is a cone, so near-source rows differentiate cleanly instead of
poisoning the fit.  Weights derive from per-axis high differences of the
squared table matched to the stencil order (a truncation-error proxy), so
rows touching a coverage edge are down-weighted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boundary import BoundaryGeometry
from .dataset import TravelTimeDataset
from .errors import (DefinitenessError, FieldRecoveryError, GenericityError,
                     ParametrizationError, PositivityError)
from .grids import fifth_difference, grid_gradient, third_difference
from .metric import MetricFieldOnD, spd_mask

KAPPA_MAX = 1e8
SIGMA_FLOOR = 1e-10
MAX_FAIL_FRACTION = 0.05
# minimum 1 - (d_t lam)^2 for a row to vote in REDUCED mode; below it the
# ray runs within ~13 degrees of the chart normal and the row's tangential
# content is noise-dominated (the node's own source is the extreme case:
# lam = t exactly, zero information, yet a near-zero truncation proxy)
REDUCED_GATE = 0.05

FULL = "full"
REDUCED = "reduced"


@dataclass
class TravelTimeGradients:
    """Chart-coordinate gradients of every stored travel time.

    ``grads`` has shape ``(num_nodes, nt, max_slots, n)``; ``weights`` the
    matching row weights.  NaN marks gradients that the stencil rules could
    not produce (coverage holes are never extrapolated over).
    """

    grads: np.ndarray
    weights: np.ndarray


def travel_time_gradients(ds: TravelTimeDataset, *,
                          order: int = 4) -> TravelTimeGradients:
    grid = ds.grid
    bshape = grid.boundary_shape
    nb = int(np.prod(bshape))
    nt = grid.nt
    n = ds.n
    slots = ds.values.shape[2]
    geom = grid.valid_mask()

    by_source = {}
    for j, src_list in enumerate(ds.sources):
        for slot, s in enumerate(src_list):
            by_source.setdefault(int(s), []).append((j, slot))

    grads = np.full((nb, nt, slots, n), np.nan)
    sigma = np.full((nb, nt, slots), np.nan)
    spacings = grid.spacings
    for s in sorted(by_source):
        holders = by_source[s]
        field = np.full((nb, nt), np.nan)
        for j, slot in holders:
            field[j] = ds.values[j, :, slot]
        field = field.reshape(bshape + (nt,))
        data = np.isfinite(field)
        squared = field ** 2
        g2 = grid_gradient(squared, grid, order=order, geom=geom, data=data)
        sig2 = np.zeros(bshape + (nt,))
        for a in range(n):
            periodic = grid.periodic[a] if a < n - 1 else False
            if order == 4:
                dd = fifth_difference(squared, a, periodic=periodic,
                                      geom=geom, data=data)
                sig2 = sig2 + np.abs(dd) / (30.0 * spacings[a])
            else:
                dd = third_difference(squared, a, periodic=periodic,
                                      geom=geom, data=data)
                sig2 = sig2 + np.abs(dd) / (6.0 * spacings[a])
        # lam = 0 only at a source's own node on the data layer, which the
        # per-node solves never visit; the division still runs over it, so
        # silence the warning and let the weights zero the row
        with np.errstate(invalid="ignore", divide="ignore"):
            g = g2 / (2.0 * field[..., None])
            sig = sig2 / (2.0 * np.abs(field))
        g = g.reshape(nb, nt, n)
        sig = sig.reshape(nb, nt)
        for j, slot in holders:
            grads[j, :, slot, :] = g[j]
            sigma[j, :, slot] = sig[j]

    # rows lacking a truncation estimate inherit the worst one of their
    # system rather than an arbitrary default
    have_grad = np.all(np.isfinite(grads), axis=-1)
    s_for_max = np.where(np.isfinite(sigma), sigma, -np.inf)
    row_max = s_for_max.max(axis=2, keepdims=True)
    row_max = np.where(np.isfinite(row_max), row_max, 0.0)
    sigma = np.where(np.isfinite(sigma), sigma, np.broadcast_to(row_max, sigma.shape))
    weights = 1.0 / (sigma ** 2 + SIGMA_FLOOR ** 2)
    weights = np.where(have_grad, weights, 0.0)
    return TravelTimeGradients(grads=grads, weights=weights)


def _system(grads: np.ndarray, mode: str, n: int):
    if mode == FULL:
        ii, jj = np.triu_indices(n)
        fac = np.where(ii == jj, 1.0, 2.0)
        a = fac * grads[:, ii] * grads[:, jj]
        b = np.ones(grads.shape[0])
    elif mode == REDUCED:
        ii, jj = np.triu_indices(n - 1)
        fac = np.where(ii == jj, 1.0, 2.0)
        a = fac * grads[:, ii] * grads[:, jj]
        b = 1.0 - grads[:, n - 1] ** 2
    else:
        raise ValueError(f"unknown solve mode {mode!r}")
    return a, b, (ii, jj)


def _assemble(q: np.ndarray, mode: str, n: int) -> np.ndarray:
    g = np.zeros((n, n))
    if mode == FULL:
        ii, jj = np.triu_indices(n)
        g[ii, jj] = q
        g[jj, ii] = q
    else:
        ii, jj = np.triu_indices(n - 1)
        g[ii, jj] = q
        g[jj, ii] = q
        g[n - 1, n - 1] = 1.0
    return g


def recover_metric_point(grads: np.ndarray, mode: str = REDUCED, *,
                         weights: np.ndarray = None,
                         kappa_max: float = KAPPA_MAX, node=None):
    """Solve one node's eikonal system.

    ``grads`` holds one finite gradient covector per row.  Returns the
    contravariant tensor, the condition number of the weighted normal
    system, and the weighted rms residual.
    """
    grads = np.atleast_2d(np.asarray(grads, dtype=float))
    m, n = grads.shape
    if m == 0 or not np.all(np.isfinite(grads)):
        raise GenericityError(f"no usable equations at node {node}", node=node)
    if weights is None:
        weights = np.ones(m)
    w = np.asarray(weights, dtype=float)
    if mode == REDUCED:
        w = np.where(1.0 - grads[:, -1] ** 2 >= REDUCED_GATE, w, 0.0)
    wmax = w.max()
    if not (wmax > 0):
        raise GenericityError(f"all rows weightless at node {node}", node=node)
    sw = np.sqrt(w / wmax)

    a, b, _ = _system(grads, mode, n)
    a_s = a * sw[:, None]
    b_s = b * sw
    u, s, vt = np.linalg.svd(a_s, full_matrices=False)
    if s[-1] <= 0 or not np.isfinite(s[0]):
        cond = np.inf
    else:
        cond = float((s[0] / s[-1]) ** 2)
    if cond > kappa_max:
        raise GenericityError(
            f"eikonal system too ill-conditioned at node {node} "
            f"(kappa={cond:.3e})", node=node, cond=cond)
    q = vt.T @ ((u.T @ b_s) / s)
    residual = float(np.linalg.norm(a_s @ q - b_s) / np.sqrt(m))
    g = _assemble(q, mode, n)
    if not bool(spd_mask(g)):
        raise DefinitenessError(
            f"recovered contravariant metric not SPD at node {node}",
            node=node)
    return g, cond, residual


@dataclass
class RecoveryDiagnostics:
    cond: np.ndarray        # (*bshape, nt) condition numbers, NaN at failures
    residual: np.ndarray    # (*bshape, nt) weighted rms residuals
    failed: np.ndarray      # (*bshape, nt) bool, True where no tensor produced
    fail_fraction: float
    structure_error: float  # FULL mode: worst |g^{nn}-1|, |g^{an}| observed


def recover_metric_field(ds: TravelTimeDataset, mode: str = REDUCED, *,
                         order: int = 4, kappa_max: float = KAPPA_MAX,
                         max_fail_fraction: float = MAX_FAIL_FRACTION,
                         return_diagnostics: bool = False):
    """Recover the chart metric on every valid grid node.

    Interior layers (t > 0) are solved independently; the t = 0 layer of
    each column comes from quadratic one-sided extrapolation of the first
    three interior layers, which sidesteps the non-smooth own-source vertex
    at the boundary.
    """
    grid = ds.grid
    n = ds.n
    nb = int(np.prod(grid.boundary_shape))
    nt = grid.nt
    counts = grid.t_counts.reshape(-1)
    tg = travel_time_gradients(ds, order=order)

    contra = np.full((nb, nt, n, n), np.nan)
    cond = np.full((nb, nt), np.nan)
    resid = np.full((nb, nt), np.nan)
    failed = np.zeros((nb, nt), dtype=bool)
    structure = 0.0

    for j in range(nb):
        for k in range(1, int(counts[j])):
            rows = np.all(np.isfinite(tg.grads[j, k]), axis=-1)
            rows &= tg.weights[j, k] > 0
            if not np.any(rows):
                failed[j, k] = True
                continue
            try:
                g, c, r = recover_metric_point(
                    tg.grads[j, k][rows], mode, weights=tg.weights[j, k][rows],
                    kappa_max=kappa_max, node=(j, k))
            except (GenericityError, DefinitenessError):
                failed[j, k] = True
                continue
            contra[j, k] = g
            cond[j, k] = c
            resid[j, k] = r
            if mode == FULL:
                structure = max(structure, abs(g[n - 1, n - 1] - 1.0),
                                float(np.abs(g[:n - 1, n - 1]).max()
                                      if n > 1 else 0.0))
        # quadratic one-sided extrapolation fills the boundary layer
        if counts[j] >= 4 and not np.any(failed[j, 1:4]):
            g0 = 3.0 * contra[j, 1] - 3.0 * contra[j, 2] + contra[j, 3]
            if bool(spd_mask(g0)):
                contra[j, 0] = g0
                cond[j, 0] = cond[j, 1]
                resid[j, 0] = resid[j, 1]
            else:
                failed[j, 0] = True
        else:
            failed[j, 0] = True

    valid = grid.valid_mask().reshape(nb, nt)
    failed &= valid
    fail_fraction = float(failed.sum() / max(valid.sum(), 1))
    bshape = grid.boundary_shape
    diag = RecoveryDiagnostics(
        cond=cond.reshape(bshape + (nt,)),
        residual=resid.reshape(bshape + (nt,)),
        failed=failed.reshape(bshape + (nt,)),
        fail_fraction=fail_fraction,
        structure_error=structure,
    )
    if fail_fraction > max_fail_fraction:
        raise FieldRecoveryError(
            f"{100 * fail_fraction:.1f}% of nodes failed metric recovery",
            failed_mask=diag.failed)
    accepted = valid & ~failed
    metric = MetricFieldOnD.from_contravariant(
        grid, contra.reshape(bshape + (nt, n, n)),
        valid=accepted.reshape(bshape + (nt,)), mode=mode)
    if return_diagnostics:
        return metric, diag
    return metric


@dataclass
class BoundaryRhoTrace:
    """Boundary conformal factor fitted from the t = 0 metric layer."""

    rho: np.ndarray       # (*bshape,)
    residual: np.ndarray  # (*bshape,) rms misfit of the scalar fit
    valid: np.ndarray     # (*bshape,) bool


def recover_boundary_rho(metric: MetricFieldOnD,
                         bg: BoundaryGeometry) -> BoundaryRhoTrace:
    """Fit ``rho`` on the boundary from ``g_ab(x',0) = rho * E_ab``.

    ``E`` is the first fundamental form of the boundary parametrization,
    built from the stored tangent vectors.  The fit is a per-node scalar
    least squares across all tangential component pairs.
    """
    n = metric.n
    g0 = metric.cov[..., 0, :n - 1, :n - 1]
    bshape = bg.bshape
    tang = bg.tangents
    e = np.einsum("...ak,...bk->...ab", tang, tang)
    scale = np.abs(e).reshape(bshape + (-1,)).max(axis=-1)
    dete = np.linalg.det(e)
    if np.any(dete <= 1e-12 * scale ** (n - 1)):
        node = tuple(int(v) for v in
                     np.argwhere(dete <= 1e-12 * scale ** (n - 1))[0])
        raise ParametrizationError(
            f"degenerate first fundamental form at boundary node {node}")

    num = np.einsum("...ab,...ab->...", g0, e)
    den = np.einsum("...ab,...ab->...", e, e)
    valid = np.all(np.isfinite(g0), axis=(-2, -1))
    rho = np.where(valid, num / den, np.nan)
    if np.any(valid & ~(rho > 0)):
        node = tuple(int(v) for v in np.argwhere(valid & ~(rho > 0))[0])
        raise PositivityError(f"fitted boundary rho not positive at node "
                              f"{node}")
    mis = g0 - rho[..., None, None] * e
    residual = np.sqrt(np.where(
        valid, np.mean(mis ** 2, axis=(-2, -1)), np.nan))
    return BoundaryRhoTrace(rho=rho, residual=residual, valid=valid)
