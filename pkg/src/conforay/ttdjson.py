"""TTD-JSON v1: the on-disk interchange format for travel-time datasets.

Layout (all float arrays flattened node-major: boundary nodes in row-major
parameter order, then t ascending within the column, then source-slot
order)::

    {
      "format": "TTD", "version": 1, "n": <int>,
      "boundary": {"param_shape": [...], "cartesian": [[f; n], ...],
                    "normal": [[f; n], ...], "tangents": [[[f; n]; n-1], ...]},
      "grid": {"dy": [f; n-1], "dt": f, "t_counts": [int, ...]},
      "sources": {"per_node": [[int, ...], ...]},
      "lambda": {"layout": "node-major", "values": [f | null, ...]},
      "ground_truth": {...},            # optional
      "meta": {...}
    }

Floats are written with Python's shortest round-trip representation, so a
write/read cycle reproduces every value bit-for-bit.  Missing travel times
are ``null``.
"""

from __future__ import annotations

import json

import numpy as np

from .boundary import BoundaryGeometry
from .dataset import GroundTruth, TravelTimeDataset
from .errors import ParseError, VersionError
from .grids import DGrid

FORMAT_NAME = "TTD"
FORMAT_VERSION = 1


def _nullable(arr):
    flat = np.asarray(arr, dtype=float).ravel()
    return [None if not np.isfinite(v) else float(v) for v in flat]


def _node_major(ds: TravelTimeDataset, per_node_arrays):
    """Flatten per-(node, t) data to the canonical node-major list."""
    out = []
    counts = ds.grid.t_counts.ravel()
    for j, cnt in enumerate(counts):
        out.extend(per_node_arrays(j, int(cnt)))
    return out


def dataset_write(ds: TravelTimeDataset, path) -> None:
    bg = ds.boundary
    counts = ds.grid.t_counts.ravel()
    nb = counts.size

    lam = []
    for j in range(nb):
        ns = len(ds.sources[j])
        block = ds.values[j, :counts[j], :ns].ravel()
        lam.extend(None if not np.isfinite(v) else float(v) for v in block)

    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "n": int(ds.n),
        "boundary": {
            "param_shape": [int(m) for m in bg.bshape],
            "cartesian": bg.flat_points().tolist(),
            "normal": bg.normals.reshape(-1, ds.n).tolist(),
            "tangents": bg.tangents.reshape(-1, ds.n - 1, ds.n).tolist(),
        },
        "grid": {
            "dy": [float(v) for v in ds.grid.dy],
            "dt": float(ds.grid.dt),
            "t_counts": [int(c) for c in counts],
        },
        "sources": {
            "per_node": [[int(s) for s in src] for src in ds.sources],
        },
        "lambda": {"layout": "node-major", "values": lam},
        "meta": dict(ds.meta),
    }
    gt = ds.ground_truth
    if gt is not None:
        mask = ds.grid.valid_mask().reshape(nb, -1)
        gamma = gt.gamma.reshape(nb, -1, ds.n)
        met = gt.metric_cov.reshape(nb, -1, ds.n * ds.n)
        rho = gt.rho_on_gamma.reshape(nb, -1)
        jac = gt.jac_dets.reshape(nb, -1)
        doc["ground_truth"] = {
            "gamma": [x.tolist() for j in range(nb) for x in gamma[j, mask[j]]],
            "rho_on_gamma": [float(v) for j in range(nb) for v in rho[j, mask[j]]],
            "metric_cov": [_nullable(m) for j in range(nb) for m in met[j, mask[j]]],
            "jac_dets": _nullable(np.concatenate(
                [jac[j, mask[j]] for j in range(nb)])),
            "boundary_rho": [float(v) for v in gt.boundary_rho.ravel()],
        }
    with open(path, "w") as fp:
        json.dump(doc, fp, allow_nan=False)


def _expect(cond, msg, path):
    if not cond:
        raise ParseError(msg, path=path)


def _float_array(obj, shape, path, nullable=False):
    arr = np.empty(shape, dtype=float)
    flat = arr.reshape(-1)
    seq = np.asarray(obj, dtype=object).reshape(-1) if _shaped(obj, shape) else None
    _expect(seq is not None, f"expected nested lists of shape {shape}", path)
    for i, v in enumerate(seq):
        if v is None:
            _expect(nullable, "null not allowed here", f"{path}[{i}]")
            flat[i] = np.nan
        else:
            _expect(isinstance(v, (int, float)) and np.isfinite(v),
                    "expected a finite number", f"{path}[{i}]")
            flat[i] = float(v)
    return arr


def _shaped(obj, shape):
    try:
        return np.asarray(obj, dtype=object).reshape(shape) is not None
    except (ValueError, TypeError):
        return False


def dataset_read(path) -> TravelTimeDataset:
    """Parse and validate a TTD-JSON document back into a dataset."""
    with open(path) as fp:
        try:
            doc = json.load(fp, parse_constant=_reject_constant)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}", path="$") from exc

    _expect(isinstance(doc, dict), "document must be an object", "$")
    _expect(doc.get("format") == FORMAT_NAME,
            f"format must be {FORMAT_NAME!r}", "$.format")
    if doc.get("version") != FORMAT_VERSION:
        raise VersionError(f"unsupported version {doc.get('version')!r}, "
                           f"expected {FORMAT_VERSION}", path="$.version")
    n = doc.get("n")
    _expect(isinstance(n, int) and n >= 2, "n must be an integer >= 2", "$.n")

    b = doc.get("boundary")
    _expect(isinstance(b, dict), "missing boundary object", "$.boundary")
    pshape = b.get("param_shape")
    _expect(isinstance(pshape, list) and len(pshape) == n - 1
            and all(isinstance(m, int) and m >= 3 for m in pshape),
            "param_shape must list n-1 node counts >= 3", "$.boundary.param_shape")
    bshape = tuple(pshape)
    nb = int(np.prod(bshape))
    pts = _float_array(b.get("cartesian"), (nb, n), "$.boundary.cartesian")
    nrm = _float_array(b.get("normal"), (nb, n), "$.boundary.normal")
    tan = _float_array(b.get("tangents"), (nb, n - 1, n), "$.boundary.tangents")

    g = doc.get("grid")
    _expect(isinstance(g, dict), "missing grid object", "$.grid")
    dy = g.get("dy")
    _expect(isinstance(dy, list) and len(dy) == n - 1
            and all(isinstance(v, (int, float)) and v > 0 for v in dy),
            "grid.dy must list n-1 positive spacings", "$.grid.dy")
    dt = g.get("dt")
    _expect(isinstance(dt, (int, float)) and dt > 0,
            "grid.dt must be positive", "$.grid.dt")
    t_counts = g.get("t_counts")
    _expect(isinstance(t_counts, list) and len(t_counts) == nb
            and all(isinstance(c, int) and c >= 1 for c in t_counts),
            "t_counts must list one positive count per boundary node",
            "$.grid.t_counts")

    meta = doc.get("meta", {})
    _expect(isinstance(meta, dict), "meta must be an object", "$.meta")
    periodic = meta.get("boundary_periodic", [False] * (n - 1))
    _expect(isinstance(periodic, list) and len(periodic) == n - 1,
            "meta.boundary_periodic must list n-1 booleans",
            "$.meta.boundary_periodic")

    src = doc.get("sources")
    _expect(isinstance(src, dict) and isinstance(src.get("per_node"), list)
            and len(src["per_node"]) == nb,
            "sources.per_node must list one source list per boundary node",
            "$.sources.per_node")
    sources = []
    for j, lst in enumerate(src["per_node"]):
        _expect(isinstance(lst, list) and len(lst) >= 1
                and all(isinstance(s, int) and 0 <= s < nb for s in lst),
                "source ids must be boundary node indices",
                f"$.sources.per_node[{j}]")
        sources.append(np.array(lst, dtype=int))

    lam_obj = doc.get("lambda")
    _expect(isinstance(lam_obj, dict), "missing lambda object", "$.lambda")
    _expect(lam_obj.get("layout") == "node-major",
            "lambda.layout must be 'node-major'", "$.lambda.layout")
    vals = lam_obj.get("values")
    expected = sum(t_counts[j] * len(sources[j]) for j in range(nb))
    _expect(isinstance(vals, list) and len(vals) == expected,
            f"lambda.values must hold {expected} entries", "$.lambda.values")

    counts = np.array(t_counts, dtype=int).reshape(bshape)
    grid = DGrid(tuple(float(v) for v in dy), float(dt), bshape, counts,
                 tuple(bool(p) for p in periodic))
    max_slots = max(len(s) for s in sources)
    values = np.full((nb, grid.nt, max_slots), np.nan)
    pos = 0
    for j in range(nb):
        ns = len(sources[j])
        for k in range(t_counts[j]):
            for sl in range(ns):
                v = vals[pos]
                pos += 1
                if v is None:
                    continue
                _expect(isinstance(v, (int, float)) and np.isfinite(v) and v >= -1e-12,
                        "travel times must be finite non-negative numbers",
                        f"$.lambda.values[{pos - 1}]")
                values[j, k, sl] = float(v)

    bg = BoundaryGeometry(pts.reshape(bshape + (n,)),
                          nrm.reshape(bshape + (n,)),
                          tan.reshape(bshape + (n - 1, n)),
                          tuple(float(v) for v in dy),
                          tuple(bool(p) for p in periodic))

    truth = None
    gt = doc.get("ground_truth")
    if gt is not None:
        _expect(isinstance(gt, dict), "ground_truth must be an object",
                "$.ground_truth")
        total = int(counts.sum())
        gamma_f = _float_array(gt.get("gamma"), (total, n), "$.ground_truth.gamma")
        rho_f = _float_array(gt.get("rho_on_gamma"), (total,),
                             "$.ground_truth.rho_on_gamma")
        met_f = _float_array(gt.get("metric_cov"), (total, n * n),
                             "$.ground_truth.metric_cov", nullable=True)
        jac_f = _float_array(gt.get("jac_dets"), (total,),
                             "$.ground_truth.jac_dets", nullable=True)
        brho = _float_array(gt.get("boundary_rho"), (nb,),
                            "$.ground_truth.boundary_rho")
        gamma = np.full((nb, grid.nt, n), np.nan)
        rho_g = np.full((nb, grid.nt), np.nan)
        met = np.full((nb, grid.nt, n, n), np.nan)
        jac = np.full((nb, grid.nt), np.nan)
        pos = 0
        for j in range(nb):
            c = t_counts[j]
            gamma[j, :c] = gamma_f[pos:pos + c]
            rho_g[j, :c] = rho_f[pos:pos + c]
            met[j, :c] = met_f[pos:pos + c].reshape(c, n, n)
            jac[j, :c] = jac_f[pos:pos + c]
            pos += c
        truth = GroundTruth(
            gamma=gamma.reshape(bshape + (grid.nt, n)),
            rho_on_gamma=rho_g.reshape(bshape + (grid.nt,)),
            metric_cov=met.reshape(bshape + (grid.nt, n, n)),
            boundary_rho=brho.reshape(bshape),
            jac_dets=jac.reshape(bshape + (grid.nt,)),
        )

    return TravelTimeDataset(n=n, grid=grid, boundary=bg, sources=sources,
                             values=values, ground_truth=truth, meta=meta)


def _reject_constant(token):
    raise ParseError(f"non-finite token {token!r} not allowed", path="$")


def dataset_equal(a: TravelTimeDataset, b: TravelTimeDataset) -> bool:
    """Field-for-field equality; NaN entries compare equal to NaN."""
    if a.n != b.n or a.grid.boundary_shape != b.grid.boundary_shape:
        return False
    if a.grid.dy != b.grid.dy or a.grid.dt != b.grid.dt:
        return False
    if not np.array_equal(a.grid.t_counts, b.grid.t_counts):
        return False
    if a.grid.periodic != b.grid.periodic:
        return False
    for arr_a, arr_b in ((a.boundary.points, b.boundary.points),
                         (a.boundary.normals, b.boundary.normals),
                         (a.boundary.tangents, b.boundary.tangents)):
        if not np.array_equal(arr_a, arr_b):
            return False
    if len(a.sources) != len(b.sources):
        return False
    for sa, sb in zip(a.sources, b.sources):
        if not np.array_equal(sa, sb):
            return False
    if not np.array_equal(a.values, b.values, equal_nan=True):
        return False
    ga, gb = a.ground_truth, b.ground_truth
    if (ga is None) != (gb is None):
        return False
    if ga is not None:
        for arr_a, arr_b in ((ga.gamma, gb.gamma),
                             (ga.rho_on_gamma, gb.rho_on_gamma),
                             (ga.metric_cov, gb.metric_cov),
                             (ga.boundary_rho, gb.boundary_rho),
                             (ga.jac_dets, gb.jac_dets)):
            if not np.array_equal(arr_a, arr_b, equal_nan=True):
                return False
    return True
