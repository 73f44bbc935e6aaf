"""Command-line entry points.

Exit codes: 0 success, 1 pipeline stage failure, 2 I/O or schema error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .dataset import synthesize_dataset
from .errors import ConforayError, ParseError
from .phantoms import BOUNDARY_KINDS, PHANTOM_KINDS, PhantomSpec
from .pipeline import (RoundTripReport, SolverConfig, report_errors,
                       reconstruct_dataset, run_roundtrip)
from .ttdjson import dataset_read, dataset_write


def _floats(text):
    return tuple(float(v) for v in text.split(","))


def _ints(text):
    return tuple(int(v) for v in text.split(","))


def _add_phantom_args(p):
    p.add_argument("--phantom", choices=PHANTOM_KINDS, default="flat-constant")
    p.add_argument("--n", type=int, default=2, help="ambient dimension")
    p.add_argument("--constant", type=float, default=2.25)
    p.add_argument("--base", type=float, default=1.0)
    p.add_argument("--amplitude", type=float, default=0.3)
    p.add_argument("--width2", type=float, default=0.08)
    p.add_argument("--beta", type=float, default=0.2)
    p.add_argument("--center", type=_floats, default=None)
    p.add_argument("--box-lo", type=_floats, default=None)
    p.add_argument("--box-hi", type=_floats, default=None)
    p.add_argument("--boundary", choices=BOUNDARY_KINDS, default=None)
    p.add_argument("--bnum", type=_ints, default=None,
                   help="boundary node counts, comma separated")
    p.add_argument("--p0", type=_floats, default=None)
    p.add_argument("--p1", type=_floats, default=None)
    p.add_argument("--bcenter", type=_floats, default=None)
    p.add_argument("--bradius", type=float, default=None)
    p.add_argument("--theta0", type=float, default=None)
    p.add_argument("--theta1", type=float, default=None)
    p.add_argument("--open-arc", action="store_true",
                   help="treat the circle arc as non-periodic")
    p.add_argument("--parametrization", choices=("arclength", "angle"),
                   default=None)


def _add_config_args(p):
    p.add_argument("--mode", choices=("reduced", "full"), default="reduced")
    p.add_argument("--dt", type=float, default=1.0 / 64)
    p.add_argument("--t-max", type=float, default=0.5)
    p.add_argument("--sources", type=int, default=None,
                   help="sources per boundary node")
    p.add_argument("--source-radius", type=float, default=None)
    p.add_argument("--tau-mode", choices=("analytic", "fmm"),
                   default="analytic")
    p.add_argument("--h", type=float, default=None,
                   help="eikonal grid spacing for fmm mode")
    p.add_argument("--eik-lo", type=_floats, default=None,
                   help="eikonal box low corner (fmm mode)")
    p.add_argument("--eik-hi", type=_floats, default=None,
                   help="eikonal box high corner (fmm mode)")
    p.add_argument("--init-radius-steps", type=int, default=8,
                   help="exact-initialization ball radius in grid steps")
    p.add_argument("--theta-j", type=float, default=0.05)
    p.add_argument("--margin", type=int, default=4)
    p.add_argument("--order", type=int, choices=(2, 4), default=4,
                   help="travel-time gradient stencil order")
    p.add_argument("--kappa-max", type=float, default=1e8)
    p.add_argument("--max-fail-fraction", type=float, default=0.05)
    p.add_argument("--smooth-cutoff", type=float, default=None,
                   help="kept mode fraction of the per-layer projection")
    p.add_argument("--coeff-smooth-degree", type=int, default=None,
                   help="polynomial degree for smoothing recovered "
                        "coefficients (off when omitted)")
    p.add_argument("--eps-k", type=float, default=None)
    p.add_argument("--eps-v", type=float, default=1e-8)


def _phantom_spec(args) -> PhantomSpec:
    params = {}
    if args.phantom == "flat-constant":
        params["constant"] = args.constant
    elif args.phantom == "gaussian-bump":
        params.update(base=args.base, amplitude=args.amplitude,
                      width2=args.width2)
        if args.center is not None:
            params["center"] = list(args.center)
    elif args.phantom == "radial":
        params.update(amplitude=args.amplitude, beta=args.beta)
        if args.center is not None:
            params["center"] = list(args.center)
    if args.box_lo is not None:
        params["box_lo"] = list(args.box_lo)
    if args.box_hi is not None:
        params["box_hi"] = list(args.box_hi)

    boundary = {}
    if args.boundary is not None:
        boundary["kind"] = args.boundary
    kind = boundary.get("kind", "segment" if args.n == 2 else "plane-patch")
    if args.bnum is not None:
        key = "counts" if kind in ("plane-patch", "sphere-patch") else "num"
        boundary[key] = args.bnum if key == "counts" else args.bnum[0]
    for name, val in (("p0", args.p0), ("p1", args.p1),
                      ("center", args.bcenter), ("radius", args.bradius),
                      ("theta0", args.theta0), ("theta1", args.theta1),
                      ("parametrization", args.parametrization)):
        if val is not None:
            boundary[name] = val
    if args.open_arc:
        boundary["periodic"] = False
    return PhantomSpec(kind=args.phantom, params=params, boundary=boundary,
                       n=args.n)


def _config(args) -> SolverConfig:
    box = None
    if args.eik_lo is not None and args.eik_hi is not None:
        box = (list(args.eik_lo), list(args.eik_hi))
    return SolverConfig(
        mode=args.mode, dt=args.dt, t_max=args.t_max,
        sources_per_node=args.sources, source_radius=args.source_radius,
        tau_mode=args.tau_mode, eikonal_h=args.h, eikonal_box=box,
        theta_j=args.theta_j, margin=args.margin, gradient_order=args.order,
        kappa_max=args.kappa_max, max_fail_fraction=args.max_fail_fraction,
        smooth_cutoff=args.smooth_cutoff,
        coeff_smooth_degree=args.coeff_smooth_degree,
        eps_k=args.eps_k, eps_v=args.eps_v,
        init_radius_steps=args.init_radius_steps)


def _write_report(report: RoundTripReport, path):
    if path:
        with open(path, "w") as fp:
            json.dump(report.to_dict(), fp, indent=2)
    else:
        json.dump(report.to_dict(), sys.stdout, indent=2)
        sys.stdout.write("\n")


def _dump_rows(path, header, rows):
    with open(path, "w", newline="") as fp:
        wr = csv.writer(fp)
        wr.writerow(header)
        wr.writerows(rows)


def _grid_rows(grid, arr, ncomp):
    """Rows (y-index..., t, comps...) over valid nodes of a D-grid array."""
    valid = grid.valid_mask()
    rows = []
    for idx in np.ndindex(*grid.shape):
        if not valid[idx]:
            continue
        vals = np.atleast_1d(arr[idx])[:ncomp]
        rows.append([*idx[:-1], idx[-1] * grid.dt,
                     *(repr(float(v)) for v in vals)])
    return rows


def _dump_field(name, path, products):
    ds = products["dataset"]
    grid = ds.grid
    n = ds.n
    if name == "gtilde":
        arr = products["metric"].cov.reshape(grid.shape + (n * n,))
        comps = [f"g_{i + 1}{j + 1}" for i in range(n) for j in range(n)]
        _dump_rows(path, [*_ycols(n), "t", *comps], _grid_rows(grid, arr, n * n))
    elif name == "rho-boundary":
        tr = products["rho_trace"]
        rows = [[*idx, repr(float(tr.rho[idx]))]
                for idx in np.ndindex(*tr.rho.shape)]
        _dump_rows(path, [*_ycols(n), "rho"], rows)
    elif name == "gamma":
        rec = products["reconstruction"]
        comps = [f"x{j + 1}" for j in range(n)]
        _dump_rows(path, [*_ycols(n), "t", *comps],
                   _grid_rows(grid, rec.gamma, n))
    elif name == "rho-on-gamma":
        rec = products["reconstruction"]
        _dump_rows(path, [*_ycols(n), "t", "rho"],
                   _grid_rows(grid, rec.rho_on_gamma[..., None], 1))
    elif name == "jac":
        rec = products["reconstruction"]
        _dump_rows(path, [*_ycols(n), "t", "det"],
                   _grid_rows(grid, rec.jac_dets[..., None], 1))
    else:
        raise ParseError(f"unknown dump field {name!r}")


def _ycols(n):
    return [f"iy{a + 1}" for a in range(n - 1)]


def _cmd_synthesize(args) -> int:
    spec = _phantom_spec(args)
    cfg = _config(args)
    rho, bg = spec.build()
    ds = synthesize_dataset(
        rho, bg, dt=cfg.dt, t_max=cfg.t_max,
        sources_per_node=cfg.sources_per_node,
        source_radius=cfg.source_radius, tau_mode=cfg.tau_mode,
        eikonal_h=cfg.eikonal_h, theta_j=cfg.theta_j, margin=cfg.margin)
    dataset_write(ds, args.out)
    print(f"wrote {args.out}: {int(np.prod(bg.bshape))} columns, "
          f"nt={ds.grid.nt}, sources/node>={min(len(s) for s in ds.sources)}")
    return 0


def _cmd_reconstruct(args) -> int:
    ds = dataset_read(args.infile)
    cfg = _config(args)
    rep = RoundTripReport(settings={"config": cfg.echo(),
                                    "dataset": args.infile})
    try:
        products = reconstruct_dataset(ds, cfg, rep)
    except ConforayError as exc:
        rep.failed_stage = rep.diagnostics.pop("_stage", "reconstruct")
        rep.failure = str(exc)
        rep.passed = False
        _write_report(rep, args.out_report)
        return 1
    if ds.ground_truth is not None:
        scored = report_errors(ds.ground_truth, products["reconstruction"],
                               products["metric"], products["rho_trace"],
                               settings=rep.settings)
        rep.metrics = scored.metrics
    rep.passed = True
    rep.chart_degeneration = ds.meta.get("truncated_columns", 0) > 0
    _write_report(rep, args.out_report)
    for name, path in args.dump or []:
        _dump_field(name, path, products)
    return 0


def _cmd_roundtrip(args) -> int:
    spec = _phantom_spec(args)
    cfg = _config(args)
    rep = run_roundtrip(spec, cfg)
    _write_report(rep, args.out_report)
    return 0 if rep.failed_stage is None else 1


def _cmd_validate(args) -> int:
    ds = dataset_read(args.infile)
    problems = []
    own = ds.own_slots()
    counts = ds.grid.t_counts.reshape(-1)
    t = ds.grid.t_values()
    for j in range(len(ds.sources)):
        if j not in set(int(s) for s in ds.sources[j]):
            problems.append(f"node {j} does not carry its own source")
            continue
        col = ds.values[j, :counts[j], own[j]]
        tt = t[:counts[j]]
        ok = np.isfinite(col)
        if np.any(np.abs(col[ok] - tt[ok]) > 0.05 * tt[ok] + 3 * ds.grid.dt):
            problems.append(f"node {j}: own-source travel time deviates "
                            f"from t")
    if problems:
        for p in problems[:20]:
            print(f"invalid: {p}", file=sys.stderr)
        return 1
    print(f"ok: {len(ds.sources)} columns, nt={ds.grid.nt}, "
          f"ground_truth={'yes' if ds.ground_truth is not None else 'no'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="conforay",
        description="Travel-time synthesis and conformal-metric "
                    "reconstruction on boundary-normal charts.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="generate a travel-time dataset")
    _add_phantom_args(p)
    _add_config_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_synthesize)

    p = sub.add_parser("reconstruct", help="run recovery on a dataset file")
    _add_config_args(p)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out-report", default=None)
    p.add_argument("--dump", nargs=2, action="append",
                   metavar=("FIELD", "PATH"),
                   help="write a recovered field as CSV "
                        "(gtilde|rho-boundary|gamma|rho-on-gamma|jac)")
    p.set_defaults(fn=_cmd_reconstruct)

    p = sub.add_parser("roundtrip", help="synthesize + reconstruct + score")
    _add_phantom_args(p)
    _add_config_args(p)
    p.add_argument("--out-report", default=None)
    p.set_defaults(fn=_cmd_roundtrip)

    p = sub.add_parser("validate", help="check a dataset file's invariants")
    p.add_argument("--in", dest="infile", required=True)
    p.set_defaults(fn=_cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except ConforayError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
