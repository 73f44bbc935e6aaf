"""Travel-time dataset synthesis.

The measured object is the table ``lam(y, x'')``: the travel time from the
chart point ``gamma(y)`` to a boundary source ``x''`` near the foot of the
column of ``y``.  Each boundary node owns a deterministic, asymmetric
pattern of source nodes inside ``source_radius``; the stored table also
covers every source owned by a column within ``margin`` grid steps, so
finite-difference stencils across neighbouring columns always see the same
sources (overlapping source neighbourhoods).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .boundary import BoundaryGeometry
from .chart import NormalChart, build_normal_chart
from .eikonal import eikonal_solve
from .errors import DatasetError, InsufficientSourcesError
from .fields import Box, ConformalFactorField
from .grids import DGrid

# widest one-sided window of the gradient stencil cascade; the stored
# table must cover every column a selected stencil can touch, or rows die
# at coverage edges instead of falling back to lower order
AVAILABILITY_MARGIN = 4

# spacing-sorted candidate ranks used to spread a pattern over its radius
_SPREAD_RANKS = (0, 1, 2, 4, 7, 12, 20, 33, 54, 88, 143, 232)


@dataclass
class GroundTruth:
    gamma: np.ndarray          # (*bshape, nt, n) chart positions
    rho_on_gamma: np.ndarray   # (*bshape, nt)
    metric_cov: np.ndarray     # (*bshape, nt, n, n) pulled-back metric
    boundary_rho: np.ndarray   # (*bshape,)
    jac_dets: np.ndarray       # (*bshape, nt)


@dataclass
class TravelTimeDataset:
    n: int
    grid: DGrid
    boundary: BoundaryGeometry
    sources: list                 # per flat boundary node: int array of node ids
    values: np.ndarray            # (num_nodes, nt, max_slots), NaN = missing
    ground_truth: GroundTruth = None
    meta: dict = field(default_factory=dict)

    def slot_maps(self) -> list:
        """Per-column dict: source node id -> slot in the value table."""
        return [{int(s): k for k, s in enumerate(src)} for src in self.sources]

    def own_slots(self) -> np.ndarray:
        maps = self.slot_maps()
        return np.array([maps[j][j] for j in range(len(self.sources))])

    def source_points(self) -> np.ndarray:
        return self.boundary.flat_points()


def _node_offsets(bshape, periodic, dy, radius):
    """In-radius index offsets sorted by biased distance (deterministic)."""
    ranges = []
    for a, m in enumerate(bshape):
        r = int(np.floor(radius / dy[a] + 1e-9))
        r = min(r, m - 1 if not periodic[a] else m // 2)
        ranges.append(range(-r, r + 1))
    cands = []
    for off in itertools.product(*ranges):
        d2 = sum((o * dy[a]) ** 2 for a, o in enumerate(off))
        if d2 > radius ** 2 + 1e-12:
            continue
        # small positive bias makes the pattern asymmetric about the node
        key = sum((o * dy[a] - 0.25 * dy[a]) ** 2 for a, o in enumerate(off))
        cands.append((key, off))
    cands.sort()
    return [off for _, off in cands]


def _select_spread(num_available: int, k: int):
    """Pick ``k`` candidate ranks spread from near to far."""
    picks = [r for r in _SPREAD_RANKS if r < num_available][:k]
    rest = (i for i in range(num_available) if i not in set(picks))
    while len(picks) < k:
        picks.append(next(rest))
    return sorted(picks)


def _wrap_index(idx, m, periodic):
    if periodic:
        return idx % m
    return idx if 0 <= idx < m else None


def build_source_patterns(bg: BoundaryGeometry, sources_per_node: int,
                          source_radius: float, margin: int = AVAILABILITY_MARGIN):
    """Owned and available source lists per boundary node.

    Returns ``(owned, available)``: lists over flattened boundary nodes of
    int arrays of flat node ids.  ``available[j]`` is the union of the
    owned patterns of every column within ``margin`` index steps of ``j``,
    which is what the stored table must cover for stencil completeness.
    """
    bshape = bg.bshape
    offsets = _node_offsets(bshape, bg.periodic, bg.dy, source_radius)
    nb = int(np.prod(bshape))
    owned = []
    for j in range(nb):
        jm = np.unravel_index(j, bshape)
        cand = []
        for off in offsets:
            im = []
            for a, o in enumerate(off):
                w = _wrap_index(jm[a] + o, bshape[a], bg.periodic[a])
                if w is None:
                    break
                im.append(w)
            else:
                cand.append(int(np.ravel_multi_index(tuple(im), bshape)))
        # wrapping can alias to the same node on tiny periodic grids
        cand = list(dict.fromkeys(cand))
        if len(cand) < sources_per_node:
            raise InsufficientSourcesError(
                f"boundary node {jm}: only {len(cand)} sources within "
                f"radius {source_radius}, need {sources_per_node}")
        picks = _select_spread(len(cand), sources_per_node)
        owned.append(np.array([cand[p] for p in picks], dtype=int))

    available = []
    for j in range(nb):
        jm = np.unravel_index(j, bshape)
        union = set()
        for off in itertools.product(*(range(-margin, margin + 1)
                                       for _ in bshape)):
            im = []
            for a, o in enumerate(off):
                w = _wrap_index(jm[a] + o, bshape[a], bg.periodic[a])
                if w is None:
                    break
                im.append(w)
            else:
                union.update(
                    int(s) for s in owned[np.ravel_multi_index(tuple(im), bshape)])
        available.append(np.array(sorted(union), dtype=int))
    return owned, available


def _analytic_tau_constant(rho: ConformalFactorField) -> float:
    params = getattr(rho, "params", None) or {}
    c = params.get("constant")
    if c is None:
        raise DatasetError("analytic travel-time mode needs a constant phantom")
    return float(c)


def synthesize_dataset(rho: ConformalFactorField, bg: BoundaryGeometry, *,
                       dt: float, t_max: float, sources_per_node: int = None,
                       source_radius: float = None, tau_mode: str = "fmm",
                       eikonal_h: float = None, eikonal_box: Box = None,
                       theta_j: float = 0.05, margin: int = AVAILABILITY_MARGIN,
                       with_ground_truth: bool = True,
                       init_radius_steps: int = 8) -> TravelTimeDataset:
    """Build the travel-time table for one phantom and boundary patch.

    ``tau_mode`` is ``"fmm"`` (fast marching per distinct source) or
    ``"analytic"`` (closed-form distances; constant phantoms only).  The
    chart, and with it the per-column extents, comes from
    :func:`build_normal_chart`; travel times are sampled at the chart
    points through each solution's singularity-aware interpolant.
    """
    n = bg.n
    n_unknowns = n * (n + 1) // 2
    if sources_per_node is None:
        sources_per_node = n_unknowns + 4
    if sources_per_node < n_unknowns:
        raise DatasetError(
            f"sources_per_node={sources_per_node} below the {n_unknowns} "
            f"independent metric components")
    if source_radius is None:
        source_radius = 10.0 * max(bg.dy)

    chart = build_normal_chart(rho, bg, dt, t_max, theta_j=theta_j)
    grid = chart.grid
    owned, available = build_source_patterns(bg, sources_per_node,
                                             source_radius, margin=margin)
    nb = int(np.prod(bg.bshape))
    max_slots = max(len(a) for a in available)
    values = np.full((nb, grid.nt, max_slots), np.nan)

    src_points = bg.flat_points()
    positions = chart.positions.reshape(nb, grid.nt, n)
    valid = grid.valid_mask().reshape(nb, grid.nt)

    # columns needing each source, with the slot it occupies there
    per_source_cols = {}
    for j, avail in enumerate(available):
        for slot, s in enumerate(avail):
            per_source_cols.setdefault(int(s), []).append((j, slot))

    if tau_mode == "analytic":
        c = _analytic_tau_constant(rho)
        sqrt_c = np.sqrt(c)
        for s, cols in sorted(per_source_cols.items()):
            sp = src_points[s]
            for j, slot in cols:
                m = valid[j]
                d = np.linalg.norm(positions[j, m] - sp, axis=-1)
                values[j, m, slot] = sqrt_c * d
    elif tau_mode == "fmm":
        if eikonal_h is None:
            raise DatasetError("fmm mode requires eikonal_h")
        for s, cols in sorted(per_source_cols.items()):
            tt = eikonal_solve(rho, src_points[s], eikonal_h, box=eikonal_box,
                               init_radius_steps=init_radius_steps)
            for j, slot in cols:
                m = valid[j]
                values[j, m, slot] = tt.sample(positions[j, m])
    else:
        raise DatasetError(f"unknown tau_mode {tau_mode!r}")

    truth = None
    if with_ground_truth:
        truth = GroundTruth(
            gamma=chart.positions,
            rho_on_gamma=_rho_on_chart(rho, chart),
            metric_cov=chart.pullback_metric_cov(rho),
            boundary_rho=rho.value(bg.points),
            jac_dets=chart.jac_dets,
        )

    meta = {
        "tau_mode": tau_mode,
        "sources_per_node": int(sources_per_node),
        "source_radius": float(source_radius),
        "availability_margin": int(margin),
        "theta_j": float(theta_j),
        "eikonal_h": None if eikonal_h is None else float(eikonal_h),
        "boundary_periodic": [bool(p) for p in bg.periodic],
        "t_max_requested": float(t_max),
        "truncated_columns": int(np.count_nonzero(chart.truncated)),
        "exited_columns": int(np.count_nonzero(chart.exited)),
    }
    return TravelTimeDataset(n=n, grid=grid, boundary=bg, sources=available,
                             values=values, ground_truth=truth, meta=meta)


def _rho_on_chart(rho: ConformalFactorField, chart: NormalChart) -> np.ndarray:
    pts = chart.positions
    flat = pts.reshape(-1, pts.shape[-1])
    ok = np.all(np.isfinite(flat), axis=-1)
    out = np.full(flat.shape[0], np.nan)
    if np.any(ok):
        out[ok] = rho.value(flat[ok])
    return out.reshape(pts.shape[:-1])
