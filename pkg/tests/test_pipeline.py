import dataclasses

import numpy as np

from conforay import (PhantomSpec, SolverConfig, report_errors,
                      run_roundtrip, synthesize_dataset)
from conforay.pipeline import reconstruct_dataset


FLAT = PhantomSpec(kind="flat-constant", params={"constant": 2.25},
                   boundary={"kind": "segment", "p0": [0.0, 0.0],
                             "p1": [1.0, 0.0], "num": 24})
CFG = SolverConfig(mode="reduced", dt=0.02, t_max=0.2, tau_mode="analytic")


def test_roundtrip_flat_segment_is_exact_to_roundoff():
    rep = run_roundtrip(FLAT, CFG)
    assert rep.failed_stage is None
    assert rep.metrics["gtilde_max_rel"] < 1e-10
    assert rep.metrics["rho_gamma_max_rel"] < 1e-10
    assert rep.metrics["gamma_sup"] < 1e-10
    assert rep.metrics["constraint_max"] < 1e-8
    assert not rep.chart_degeneration


def test_roundtrip_is_deterministic():
    a = run_roundtrip(FLAT, CFG).to_dict()
    b = run_roundtrip(FLAT, CFG).to_dict()
    assert a == b


def test_report_echoes_full_configuration():
    rep = run_roundtrip(FLAT, CFG)
    echo = rep.settings["config"]
    for f in dataclasses.fields(SolverConfig):
        assert f.name in echo
    assert echo["mode"] == "reduced"
    assert rep.settings["phantom"]["kind"] == "flat-constant"


def test_scaled_factor_scores_as_one_percent():
    rho, bg = FLAT.build()
    ds = synthesize_dataset(rho, bg, dt=CFG.dt, t_max=CFG.t_max,
                            tau_mode="analytic")
    out = reconstruct_dataset(ds, CFG)
    rec = out["reconstruction"]
    scaled = dataclasses.replace(rec,
                                 rho_on_gamma=1.01 * rec.rho_on_gamma)
    rep = report_errors(ds.ground_truth, scaled, out["metric"],
                        out["rho_trace"])
    assert abs(rep.metrics["rho_gamma_max_rel"] - 0.01) < 1e-6
    rep0 = report_errors(ds.ground_truth, rec, out["metric"],
                         out["rho_trace"])
    assert rep0.metrics["rho_gamma_max_rel"] < 1e-10


def test_thresholds_gate_the_report():
    rep = run_roundtrip(FLAT, CFG,
                        thresholds={"gtilde_max_rel": 1e-3,
                                    "rho_gamma_max_rel": 2e-3})
    assert rep.passed is True
    rep2 = run_roundtrip(FLAT, CFG, thresholds={"gtilde_max_rel": 1e-16})
    assert rep2.passed is False


def test_stage_failures_are_captured_not_raised():
    bad = PhantomSpec(kind="flat-constant", params={"constant": 2.25},
                      boundary={"kind": "segment", "p0": [0.0, 0.0],
                                "p1": [1.0, 0.0], "num": 24})
    cfg = SolverConfig(mode="reduced", dt=0.02, t_max=0.2, tau_mode="fmm")
    rep = run_roundtrip(bad, cfg)  # fmm without a lattice spacing
    assert rep.failed_stage == "synthesize"
    assert rep.failure
    assert rep.passed is False


def test_full_mode_roundtrip_matches_reduced_on_flat_data():
    cfg_full = dataclasses.replace(CFG, mode="full", sources_per_node=8)
    rep = run_roundtrip(FLAT, cfg_full)
    assert rep.failed_stage is None
    assert rep.metrics["gtilde_max_rel"] < 1e-10
    assert rep.diagnostics["semigeodesic_structure_error"] < 1e-10
