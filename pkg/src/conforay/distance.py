"""Lattice shortest-path oracle for metric distances.

An independent check on the eikonal solver: metric length is discretized
on a uniform lattice with an extended neighbour stencil (32 moves in 2D,
98 in 3D) and edge weights ``Euclidean length x mean slowness`` at the
endpoints.  Shortest paths then overestimate the continuous distance by
at most the stencil metrication error: the largest angular gap between
moves is 18.4 degrees in 2D, giving sec(9.2 deg) - 1 = 1.3%.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

from .errors import DomainError, UnreachableError
from .fields import Box, ConformalFactorField


def _stencil_offsets(n: int) -> np.ndarray:
    """Primitive lattice moves with components in [-r, r].

    The radius is 3 in the plane, where directional coverage drives the
    oracle's accuracy, and 2 in higher dimensions to keep the edge count
    manageable.
    """
    r = 3 if n == 2 else 2
    grids = np.meshgrid(*([np.arange(-r, r + 1)] * n), indexing="ij")
    offs = np.stack([g.ravel() for g in grids], axis=1)
    offs = offs[np.any(offs != 0, axis=1)]
    g = np.gcd.reduce(np.abs(offs), axis=1)
    return offs[g == 1]


class LatticeDistanceOracle:
    """Precomputed lattice graph answering point-to-point distance queries."""

    def __init__(self, rho: ConformalFactorField, h: float, box: Box = None):
        box = box or rho.box
        self.box = box
        self.h = float(h)
        n = box.n
        counts = np.floor((box.hi - box.lo) / h + 1e-9).astype(int) + 1
        if np.any(counts < 3):
            raise DomainError("lattice needs at least 3 nodes per axis")
        self.shape = tuple(int(c) for c in counts)
        axes = [box.lo[a] + h * np.arange(self.shape[a]) for a in range(n)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        self.points = mesh.reshape(-1, n)
        self._slow = np.sqrt(rho.value(mesh)).reshape(-1)
        self._graph = self._build_graph()
        self._cache = {}

    def _build_graph(self):
        n = len(self.shape)
        N = int(np.prod(self.shape))
        strides = np.array([int(np.prod(self.shape[a + 1:])) for a in range(n)])
        offsets = _stencil_offsets(n)
        # keep one direction per undirected edge: first nonzero component > 0
        keep = offsets[np.lexsort(offsets.T[::-1])]
        first = np.argmax(keep != 0, axis=1)
        keep = keep[keep[np.arange(len(keep)), first] > 0]
        idx = np.arange(N).reshape(self.shape)
        rows, cols, vals = [], [], []
        for off in keep:
            src_sl, dst_sl = [], []
            for a in range(n):
                o = int(off[a])
                m = self.shape[a]
                if o >= 0:
                    src_sl.append(slice(0, m - o))
                    dst_sl.append(slice(o, m))
                else:
                    src_sl.append(slice(-o, m))
                    dst_sl.append(slice(0, m + o))
            s = idx[tuple(src_sl)].ravel()
            d = idx[tuple(dst_sl)].ravel()
            length = self.h * float(np.linalg.norm(off))
            w = length * 0.5 * (self._slow[s] + self._slow[d])
            rows.append(s)
            cols.append(d)
            vals.append(w)
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
        return coo_matrix((vals, (rows, cols)), shape=(N, N)).tocsr()

    def node_index(self, x) -> int:
        x = np.asarray(x, dtype=float)
        self.box.require(x)
        rel = np.round((x - self.box.lo) / self.h).astype(int)
        rel = np.clip(rel, 0, np.array(self.shape) - 1)
        return int(np.ravel_multi_index(tuple(rel), self.shape))

    def distances_from(self, index: int) -> np.ndarray:
        if index not in self._cache:
            self._cache[index] = _csgraph_dijkstra(
                self._graph, directed=False, indices=index)
        return self._cache[index]

    def distance(self, a, b) -> float:
        ia, ib = self.node_index(a), self.node_index(b)
        # canonical query order keeps float summation identical both ways
        if ia > ib:
            ia, ib = ib, ia
        d = float(self.distances_from(ia)[ib])
        if not np.isfinite(d):
            raise UnreachableError(f"nodes {ia} and {ib} are not connected")
        return d


def dijkstra_distance(rho: ConformalFactorField, a, b, h: float,
                      box: Box = None) -> float:
    """Lattice shortest-path distance between points ``a`` and ``b``.

    Queries snap to the nearest lattice node.  Symmetric by construction
    and deterministic; ties between equal-length paths cannot affect the
    returned distance.
    """
    return LatticeDistanceOracle(rho, h, box=box).distance(a, b)
