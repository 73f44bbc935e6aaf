import numpy as np
import pytest

from conforay import DomainError, LatticeDistanceOracle, PhantomSpec, dijkstra_distance
from conforay.distance import _stencil_offsets


def test_stencil_offsets_are_primitive():
    for n, r in ((2, 3), (3, 2)):
        offs = _stencil_offsets(n)
        assert np.abs(offs).max() == r
        g = np.gcd.reduce(np.abs(offs), axis=1)
        assert np.all(g == 1)
        # symmetric set: every move has its negation
        as_set = {tuple(o) for o in offs}
        assert all(tuple(-o) in as_set for o in offs)


def test_axis_aligned_paths_are_exact():
    spec = PhantomSpec(kind="flat-constant",
                       params={"constant": 4.0, "box_lo": [0.0, 0.0],
                               "box_hi": [1.0, 1.0]})
    rho, _ = spec.build()
    d = dijkstra_distance(rho, [0.25, 0.5], [0.75, 0.5], h=1 / 16)
    assert d == pytest.approx(2.0 * 0.5, abs=1e-12)


def test_flat_distances_within_stencil_error():
    spec = PhantomSpec(kind="flat-constant",
                       params={"constant": 1.0, "box_lo": [0.0, 0.0],
                               "box_hi": [1.0, 1.0]})
    rho, _ = spec.build()
    oracle = LatticeDistanceOracle(rho, h=1 / 32)
    rng = np.random.default_rng(17)
    worst = 0.0
    for _ in range(40):
        a, b = rng.uniform(0.1, 0.9, size=(2, 2))
        ia, ib = oracle.node_index(a), oracle.node_index(b)
        pa, pb = oracle.points[ia], oracle.points[ib]
        sep = np.linalg.norm(pa - pb)
        if sep < 0.3:
            continue
        d = oracle.distance(pa, pb)
        worst = max(worst, d / sep - 1.0)
        assert d >= sep - 1e-12
    # 18.4 degree angular gaps bound the overshoot by 1.3 percent
    assert worst < 0.013


def test_distance_is_symmetric_and_cached():
    spec = PhantomSpec(kind="gaussian-bump",
                       params={"base": 1.0, "amplitude": 0.3, "width2": 0.08,
                               "center": [0.5, 0.5], "box_lo": [0.0, 0.0],
                               "box_hi": [1.0, 1.0]})
    rho, _ = spec.build()
    oracle = LatticeDistanceOracle(rho, h=1 / 24)
    d1 = oracle.distance([0.2, 0.2], [0.8, 0.7])
    d2 = oracle.distance([0.8, 0.7], [0.2, 0.2])
    assert d1 == d2
    assert len(oracle._cache) == 1


def test_lattice_needs_enough_nodes():
    spec = PhantomSpec(kind="flat-constant",
                       params={"constant": 1.0, "box_lo": [0.0, 0.0],
                               "box_hi": [1.0, 1.0]})
    rho, _ = spec.build()
    with pytest.raises(DomainError):
        LatticeDistanceOracle(rho, h=0.9)
