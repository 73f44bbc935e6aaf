"""End-to-end round-trip driver and error reporting."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .dataset import TravelTimeDataset, synthesize_dataset
from .errors import ConforayError, DatasetError
from .grids import polynomial_smooth
from .march import (assemble_cauchy_data, cke_march, reconstruct_gamma_rho,
                    spectral_project)
from .metric import MetricFieldOnD, project_semigeodesic
from .phantoms import PhantomSpec
from .recovery import (FULL, REDUCED, recover_boundary_rho,
                       recover_metric_field)

REL_FLOOR = 1e-12


@dataclass
class SolverConfig:
    """Every knob of the synthesis + reconstruction chain in one place."""

    mode: str = REDUCED
    dt: float = 1.0 / 64
    t_max: float = 0.5
    sources_per_node: int = None
    source_radius: float = None
    tau_mode: str = "analytic"
    eikonal_h: float = None
    eikonal_box: tuple = None
    theta_j: float = 0.05
    margin: int = 4
    gradient_order: int = 4
    kappa_max: float = 1e8
    max_fail_fraction: float = 0.05
    smooth_cutoff: float = None
    coeff_smooth_degree: int = None
    eps_k: float = None
    eps_v: float = 1e-8
    init_radius_steps: int = 8

    def echo(self) -> dict:
        return asdict(self)


@dataclass
class RoundTripReport:
    """Stage metrics, diagnostics, and the effective configuration."""

    settings: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    failed_stage: str = None
    failure: str = None
    chart_degeneration: bool = False
    passed: bool = None
    thresholds: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "settings": _plain(self.settings),
            "metrics": _plain(self.metrics),
            "diagnostics": _plain(self.diagnostics),
            "failed_stage": self.failed_stage,
            "failure": self.failure,
            "chart_degeneration": bool(self.chart_degeneration),
            "passed": self.passed,
            "thresholds": _plain(self.thresholds),
        }

    def apply_thresholds(self, thresholds: dict) -> bool:
        """Flag pass/fail: every listed metric must stay at or under its cap."""
        self.thresholds = dict(thresholds)
        if self.failed_stage is not None:
            self.passed = False
            return False
        ok = True
        for name, cap in thresholds.items():
            val = self.metrics.get(name)
            if val is None or not np.isfinite(val) or val > cap:
                ok = False
        self.passed = ok
        return ok


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _rel(err, denom):
    return err / np.maximum(denom, REL_FLOOR)


def report_errors(truth, rec, g_rec, rho_trace=None, *,
                  settings=None) -> RoundTripReport:
    """Score a reconstruction against the embedded ground truth.

    All metrics are taken over the intersection of nodes valid in both the
    truth block and the reconstruction; relative errors divide by the truth
    with a 1e-12 floor.
    """
    if truth is None:
        raise DatasetError("ground truth block missing; cannot score")
    rep = RoundTripReport(settings=dict(settings or {}))
    m = {}

    g_t = truth.metric_cov
    g_r = g_rec.cov
    both = (g_rec.valid & np.all(np.isfinite(g_t), axis=(-2, -1))
            & np.all(np.isfinite(g_r), axis=(-2, -1)))
    if np.any(both):
        diff = np.abs(g_r - g_t).max(axis=(-2, -1))
        den = np.abs(g_t).max(axis=(-2, -1))
        rel = _rel(diff, den)[both]
        m["gtilde_max_rel"] = float(rel.max())
        m["gtilde_mean_rel"] = float(rel.mean())

    if rho_trace is not None:
        rb_t = truth.boundary_rho
        ok = rho_trace.valid & np.isfinite(rb_t)
        if np.any(ok):
            rel = _rel(np.abs(rho_trace.rho - rb_t), np.abs(rb_t))[ok]
            m["rho_boundary_max_rel"] = float(rel.max())

    if rec is not None:
        both_g = rec.valid & np.all(np.isfinite(truth.gamma), axis=-1)
        if np.any(both_g):
            d = np.linalg.norm(rec.gamma - truth.gamma, axis=-1)[both_g]
            m["gamma_sup"] = float(d.max())
        rt = truth.rho_on_gamma
        both_r = rec.valid & np.isfinite(rt) & np.isfinite(rec.rho_on_gamma)
        if np.any(both_r):
            rel = _rel(np.abs(rec.rho_on_gamma - rt), np.abs(rt))[both_r]
            m["rho_gamma_max_rel"] = float(rel.max())
            m["rho_gamma_mean_rel"] = float(rel.mean())
        lr = rec.layer_residuals
        lo_k, hi_k = rec.family.meta.get("monitor_layers", (0, len(lr) - 1))
        win = lr[lo_k:hi_k + 1]
        m["constraint_max"] = float(np.nanmax(win)) \
            if np.any(np.isfinite(win)) else None

    rep.metrics = m
    return rep


def run_roundtrip(phantom, config: SolverConfig = None,
                  thresholds: dict = None) -> RoundTripReport:
    """Synthesize, reconstruct, and score one phantom.

    ``phantom`` is a :class:`PhantomSpec` or a prebuilt ``(field, boundary)``
    pair.  Any pipeline error is captured into the report with its stage
    name rather than propagated.
    """
    config = config or SolverConfig()
    if isinstance(phantom, PhantomSpec):
        rho, bg = phantom.build()
        phantom_echo = {"kind": phantom.kind, "params": _plain(phantom.params),
                        "boundary": _plain(phantom.boundary), "n": phantom.n}
    else:
        rho, bg = phantom
        phantom_echo = {"kind": getattr(rho, "name", "custom")}
    settings = {"config": config.echo(), "phantom": phantom_echo}
    rep = RoundTripReport(settings=settings)

    stage = "synthesize"
    try:
        box = None
        if config.eikonal_box is not None:
            from .fields import Box
            lo, hi = config.eikonal_box
            box = Box(np.asarray(lo, float), np.asarray(hi, float))
        ds = synthesize_dataset(
            rho, bg, dt=config.dt, t_max=config.t_max,
            sources_per_node=config.sources_per_node,
            source_radius=config.source_radius, tau_mode=config.tau_mode,
            eikonal_h=config.eikonal_h, eikonal_box=box,
            theta_j=config.theta_j, margin=config.margin,
            with_ground_truth=True,
            init_radius_steps=config.init_radius_steps)
        rep.diagnostics["truncated_columns"] = ds.meta["truncated_columns"]
        rep.diagnostics["exited_columns"] = ds.meta["exited_columns"]
        rep.chart_degeneration = ds.meta["truncated_columns"] > 0

        result = reconstruct_dataset(ds, config, rep)
        rep2 = report_errors(ds.ground_truth, result["reconstruction"],
                             result["metric"], result["rho_trace"],
                             settings=settings)
        rep.metrics = rep2.metrics
    except ConforayError as exc:
        rep.failed_stage = rep.diagnostics.pop("_stage", stage)
        rep.failure = str(exc)
    if thresholds:
        rep.apply_thresholds(thresholds)
    elif rep.failed_stage is None:
        rep.passed = True
    else:
        rep.passed = False
    return rep


def reconstruct_dataset(ds: TravelTimeDataset, config: SolverConfig,
                        rep: RoundTripReport = None) -> dict:
    """Recovery chain on an existing dataset; returns the stage products."""
    rep = rep if rep is not None else RoundTripReport()
    diag = rep.diagnostics

    diag["_stage"] = "recover-metric"
    metric, rdiag = recover_metric_field(
        ds, config.mode, order=config.gradient_order,
        kappa_max=config.kappa_max,
        max_fail_fraction=config.max_fail_fraction, return_diagnostics=True)
    finite_cond = rdiag.cond[np.isfinite(rdiag.cond)]
    diag["condition_number"] = {
        "median": float(np.median(finite_cond)) if finite_cond.size else None,
        "p90": float(np.percentile(finite_cond, 90)) if finite_cond.size else None,
        "max": float(finite_cond.max()) if finite_cond.size else None,
    }
    diag["recovery_fail_fraction"] = rdiag.fail_fraction
    if config.mode == FULL:
        diag["semigeodesic_structure_error"] = rdiag.structure_error

    if config.coeff_smooth_degree is not None:
        # per-node solves leave layer-to-layer jitter; differentiating the
        # coefficients in t multiplies it by 1/(2 dt), so smooth before any
        # Christoffel symbols are formed
        diag["_stage"] = "smooth-coefficients"
        deg = config.coeff_smooth_degree
        contra = metric.contra.copy()
        for axis in range(ds.grid.n):
            contra = polynomial_smooth(contra, deg, axis)
        metric = MetricFieldOnD.from_contravariant(
            ds.grid, contra, valid=metric.valid, mode=metric.mode)

    diag["_stage"] = "recover-boundary-rho"
    rho_trace = recover_boundary_rho(metric, ds.boundary)

    diag["_stage"] = "assemble-cauchy"
    cauchy = assemble_cauchy_data(rho_trace, ds.boundary)
    if config.coeff_smooth_degree is not None:
        for axis in range(ds.grid.n - 1):
            cauchy = polynomial_smooth(cauchy, config.coeff_smooth_degree,
                                       axis)
    if config.smooth_cutoff is not None:
        # the march filters every layer it produces; filtering the data
        # layer too keeps the first time difference consistent
        for axis in range(ds.grid.n - 1):
            cauchy = spectral_project(cauchy, config.smooth_cutoff, axis,
                                      ds.grid.periodic[axis])

    diag["_stage"] = "march"
    metric_march = project_semigeodesic(metric) if config.mode == FULL \
        else metric
    family = cke_march(metric_march, cauchy,
                       smooth_cutoff=config.smooth_cutoff, eps_k=config.eps_k)
    diag["constraint_curve"] = [None if not np.isfinite(r) else float(r)
                                for r in family.layer_residuals]

    diag["_stage"] = "reconstruct"
    recon = reconstruct_gamma_rho(family, ds.boundary, eps_v=config.eps_v)
    diag["min_speed2"] = recon.min_speed2
    finite_jac = recon.jac_dets[np.isfinite(recon.jac_dets)]
    diag["jacobian_min"] = float(np.abs(finite_jac).min()) \
        if finite_jac.size else None
    diag.pop("_stage", None)
    return {"dataset": ds, "metric": metric, "rho_trace": rho_trace,
            "family": family, "reconstruction": recon}
