import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from equihybrid import (FeasibleSet, GeometricSchedule, ParallelPlan, SolverConfig, solve_averaged,
                        solve_equilibrium_only, solve_halpern, solve_mann, solve_vi)
from equihybrid.parallel import ParallelMapError, WorkerPool, farthest_from, parallel_map
from equihybrid.problems import Paper1DBifunctions, Paper1DSpec, make_paper_1d

from builders import cournot_duopoly, paper_1d, vertex_vi_family


def test_blocks_are_contiguous_and_balanced():
    assert ParallelPlan(3).blocks(10) == [(0, 4), (4, 7), (7, 10)]
    assert ParallelPlan(8).blocks(3) == [(0, 1), (1, 2), (2, 3)]
    assert ParallelPlan(4).blocks(0) == [(0, 0)]
    with pytest.raises(ValueError):
        ParallelPlan(0)


@pytest.mark.parametrize("workers", [1, 2, 3, 8])
def test_parallel_map_keeps_order(workers):
    assert parallel_map(5, lambda i: i + 1, ParallelPlan(workers)) == [1, 2, 3, 4, 5]
    assert parallel_map(1, lambda i: "only", ParallelPlan(workers)) == ["only"]
    assert parallel_map(["a", "b"], lambda i: i * 10, ParallelPlan(workers)) == [0, 10]


def test_parallel_map_aggregates_failures():
    def op(i):
        if i in (2, 7):
            raise ZeroDivisionError(i)
        return i

    with pytest.raises(ParallelMapError) as info:
        parallel_map(10, op, ParallelPlan(3))
    assert list(info.value.failures) == [2, 7]
    assert "[2, 7]" in str(info.value)


def test_pool_reuse():
    with WorkerPool(ParallelPlan(4)) as pool:
        for k in (3, 9, 17):
            assert parallel_map(k, lambda i: i * i, pool.plan, pool) == [i * i for i in range(k)]


def test_farthest_from_examples():
    assert farthest_from([[1.0, 2.0]], [0.0, 0.0])[0] == 0
    i, p = farthest_from([0.3, -0.5, 0.5], [0.0])
    assert i == 1 and p.tolist() == [-0.5]
    with pytest.raises(ValueError):
        farthest_from([], [0.0])


def test_farthest_z_on_paper_problem_matches_scan():
    p = paper_1d(50, 0)
    x = np.array([0.9])
    zs = []
    for f in p.bifunctions:
        y = np.clip(x - 0.2 * f.subgrad2(x, x), 0, 1)
        zs.append(float(np.clip(x - 0.2 * f.subgrad2(y, y), 0, 1)[0]))
    best = max(range(len(zs)), key=lambda i: (abs(zs[i] - 0.9), -i))
    assert farthest_from(zs, x)[0] == best


@settings(max_examples=200, deadline=None)
@given(st.lists(st.lists(st.integers(-3, 3), min_size=2, max_size=2), min_size=1, max_size=100),
       st.lists(st.integers(-3, 3), min_size=2, max_size=2))
def test_farthest_from_is_a_maximiser(points, anchor):
    # small integers produce plenty of ties
    i, _ = farthest_from(points, anchor)
    d = [sum((a - b) ** 2 for a, b in zip(pt, anchor)) for pt in points]
    assert d[i] == max(d)
    assert all(d[k] < d[i] for k in range(i))


def test_paper_step_matches_serial_at_scale():
    bifs = Paper1DBifunctions(np.arange(1, 100_001) / 100_001.0)
    C = FeasibleSet.box([0.0], [1.0])
    x = np.array([0.97])
    serial = bifs.extragradient_block(0, len(bifs), x, 0.2, C)
    blocks = ParallelPlan(4).blocks(len(bifs))
    with WorkerPool(ParallelPlan(4)) as pool:
        parts = pool.run_blocks(len(bifs), lambda lo, hi: bifs.extragradient_block(lo, hi, x, 0.2, C))
    assert len(parts) == len(blocks)
    assert np.array_equal(np.vstack([p[0] for p in parts]), serial[0])
    assert np.array_equal(np.vstack([p[1] for p in parts]), serial[1])


def _runs():
    paper = paper_1d(101, 57)
    duo = cournot_duopoly(fee=1.0)
    vi = vertex_vi_family()
    vip = vi.as_problem()
    half = GeometricSchedule(0.5)
    yield "paper_mann", lambda w: solve_mann(paper, SolverConfig(rho=0.2, tol_step=1e-8, workers=w))
    yield "paper_halpern", lambda w: solve_halpern(
        paper, SolverConfig(rho=0.2, tol_step=1e-8, workers=w, alpha_schedule=half))
    yield "paper_averaged", lambda w: solve_averaged(paper, SolverConfig(rho=0.2, tol_step=1e-8, workers=w))
    yield "paper_eq_only", lambda w: solve_equilibrium_only(
        make_paper_1d(Paper1DSpec(33, 0)), SolverConfig(rho=0.2, tol_step=1e-8, workers=w))
    yield "cournot", lambda w: solve_mann(duo, SolverConfig(tol_step=1e-8, workers=w, max_iter=3000))
    yield "affine_vi", lambda w: solve_averaged(vip, SolverConfig(tol_step=1e-8, workers=w))
    yield "vi", lambda w: solve_vi(vi.fields, vi.lipschitz, vi.C,
                                   SolverConfig(rho=0.9 / vi.lipschitz, tol_step=1e-10, workers=w),
                                   x0=vi.x0, known_solution=vi.known_solution)


@pytest.mark.parametrize("name,run", list(_runs()), ids=[n for n, _ in _runs()])
def test_traces_identical_across_worker_counts(name, run):
    prints = {w: run(w).trace_fingerprint() for w in (1, 2, 8)}
    assert prints[1] == prints[2] == prints[8]
