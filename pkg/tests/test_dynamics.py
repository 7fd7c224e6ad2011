"""Merger engine: event times, block bookkeeping, and the append-only forest."""

import math

import numpy as np
import pytest

from mcmosaic.core import ClockAssignment, RngStream, WeightedConfig, sample_clocks
from mcmosaic.dynamics import (
    ComponentBlock,
    MonotoneForest,
    build_monotone_forest,
    merger_time,
    run_trajectory,
)
from mcmosaic.walk import breadth_first_forest, decompose, WalkPath


def random_instance(seed, n_max=10):
    gen = RngStream(seed).named("dyn-tests").generator()
    n = int(gen.integers(2, n_max + 1))
    cfg = WeightedConfig(tuple(gen.uniform(0.5, 2.0, n)))
    clocks = sample_clocks(cfg, RngStream(seed).named("dyn-tests").named("clocks"))
    return cfg, clocks


def test_block_helpers():
    b = ComponentBlock(lo=2, hi=4, mass=3.0)
    assert len(b) == 3
    assert list(b.ranks()) == [2, 3, 4]


def test_merger_time_formula():
    clocks = ClockAssignment.from_xi((0.2, 0.9, 0.5))
    # sorted clocks: 0.2, 0.5, 0.9
    left = ComponentBlock(lo=0, hi=1, mass=2.5)
    assert merger_time(left, clocks) == pytest.approx((0.9 - 0.2) / 2.5)
    assert merger_time(ComponentBlock(lo=0, hi=2, mass=1.0), clocks) is None


def test_run_trajectory_validates_q():
    cfg, clocks = random_instance(0)
    with pytest.raises(ValueError):
        run_trajectory(cfg, clocks, RngStream(0), 0.0)
    with pytest.raises(ValueError):
        run_trajectory(cfg, clocks, RngStream(0), float("inf"))


def test_event_times_strictly_increase_and_full_merge():
    for seed in range(40):
        cfg, clocks = random_instance(seed)
        traj = run_trajectory(cfg, clocks, RngStream(seed), 1e9)
        times = [ev.time for ev in traj.events]
        assert times == sorted(times)
        assert all(b < a for b, a in zip(times, times[1:])) or len(times) < 2
        # q_max huge: everything coalesces into one block
        assert len(traj.events) == len(cfg) - 1
        final = traj.blocks_at(1e9)
        assert len(final) == 1
        assert final[0].mass == pytest.approx(cfg.total_mass)


def reference_events(cfg, clocks, q_max):
    """Quadratic replay: repeatedly take the earliest adjacent-pair merger."""
    xs = list(clocks.sorted_xi())
    blocks = [
        [r, r, cfg.masses[clocks.perm[r]]] for r in range(len(cfg))
    ]  # [lo, hi, mass]
    out = []
    while len(blocks) > 1:
        cand = [
            ((xs[blocks[i + 1][0]] - xs[blocks[i][0]]) / blocks[i][2], i)
            for i in range(len(blocks) - 1)
        ]
        t, i = min(cand)
        if t > q_max:
            break
        out.append((t, blocks[i][0], blocks[i + 1][0]))
        blocks[i] = [blocks[i][0], blocks[i + 1][1], blocks[i][2] + blocks[i + 1][2]]
        del blocks[i + 1]
    return out


def test_engine_matches_quadratic_reference():
    for seed in range(60):
        cfg, clocks = random_instance(seed, n_max=12)
        q_max = float(RngStream(seed).named("qpick").generator().uniform(0.3, 3.0))
        traj = run_trajectory(cfg, clocks, RngStream(seed), q_max)
        got = [(ev.time, ev.left.lo, ev.right.lo) for ev in traj.events]
        want = reference_events(cfg, clocks, q_max)
        assert len(got) == len(want)
        for g, w in zip(got, want):
            assert g[1:] == w[1:]
            assert g[0] == pytest.approx(w[0], rel=1e-12)


def test_event_blocks_are_consistent():
    for seed in range(30):
        cfg, clocks = random_instance(seed)
        traj = run_trajectory(cfg, clocks, RngStream(seed), 1e9)
        for ev in traj.events:
            assert ev.left.hi + 1 == ev.right.lo
            # the logged time reproduces the closed-form absorption time
            assert ev.time == pytest.approx(
                merger_time(ev.left, clocks), rel=1e-12
            )
            child, parent = ev.edge
            right_vs = {clocks.perm[r] for r in ev.right.ranks()}
            left_vs = {clocks.perm[r] for r in ev.left.ranks()}
            assert child in right_vs
            assert parent in left_vs


def test_blocks_at_interpolates_history():
    cfg, clocks = random_instance(8)
    traj = run_trajectory(cfg, clocks, RngStream(8), 1e9)
    assert len(traj.blocks_at(0.0)) == len(cfg)
    for k, ev in enumerate(traj.events):
        # inclusive at the event time
        assert len(traj.blocks_at(ev.time)) == len(cfg) - (k + 1)
    masses_start = sorted(b.mass for b in traj.blocks_at(0.0))
    assert masses_start == sorted(cfg.masses[v] for v in clocks.perm)


def test_partition_matches_walk_forest_at_many_levels():
    """Dynamic partition == static excursion partition at arbitrary q."""
    for seed in range(25):
        cfg, clocks = random_instance(seed)
        traj = run_trajectory(cfg, clocks, RngStream(seed), 10.0)
        for q in (0.05, 0.3, 0.8, 1.7, 4.0, 9.5):
            path = WalkPath.from_clocks(cfg, clocks, q)
            static = frozenset(
                frozenset(e.vertices) for e in decompose(path).excursions
            )
            assert traj.partition_at(q) == static


def test_first_merger_law_two_blocks():
    """Two unit blocks merge at the clock spacing, which is Exp(1) by
    memorylessness; that matches the pair rate (product of the masses)."""
    cfg = WeightedConfig((1.0, 1.0))
    root = RngStream(77).named("pairlaw")
    times = []
    for k in range(2000):
        clocks = sample_clocks(cfg, root.indexed(k))
        traj = run_trajectory(cfg, clocks, root.indexed(k).named("run"), 1e9)
        xs = clocks.sorted_xi()
        assert traj.events[0].time == pytest.approx(xs[1] - xs[0], rel=1e-12)
        times.append(traj.events[0].time)
    mean = float(np.mean(times))
    assert abs(mean - 1.0) < 5 * 1.0 / math.sqrt(len(times))


def test_mass_biased_edge_frequencies():
    """Child picks inside the right block follow the mass bias."""
    cfg = WeightedConfig((1.0, 3.0))
    root = RngStream(13).named("edgefreq")
    hits = 0
    reps = 4000
    for k in range(reps):
        clocks = sample_clocks(cfg, root.indexed(k))
        traj = run_trajectory(cfg, clocks, root.indexed(k).named("run"), 1e9)
        ev = traj.events[0]
        # right block is a single vertex here, so test the parent pick instead
        assert ev.edge[0] == clocks.perm[1]
        hits += ev.edge[1] == clocks.perm[0]
    assert hits == reps  # left block is also a singleton: forced choice


def test_mass_biased_parent_three_blocks():
    """Force a known two-vertex left block and count the parent picks."""
    cfg = WeightedConfig((1.0, 1.0, 1.0))
    root = RngStream(29).named("parent-pick")
    picked_lo = 0
    found = 0
    for k in range(6000):
        clocks = sample_clocks(cfg, root.indexed(k))
        traj = run_trajectory(cfg, clocks, root.indexed(k).named("run"), 1e9)
        for ev in traj.events:
            if len(ev.left) == 2:
                found += 1
                picked_lo += ev.edge[1] == clocks.perm[ev.left.lo]
    assert found > 1000
    freq = picked_lo / found
    assert abs(freq - 0.5) < 3 * 0.5 / math.sqrt(found)


def test_monotone_forest_prefix_property():
    cfg, clocks = random_instance(4)
    traj = run_trajectory(cfg, clocks, RngStream(4), 1e9)
    forest = build_monotone_forest(traj)
    assert isinstance(forest, MonotoneForest)
    times = [t for _, _, t in forest.edge_log]
    assert times == sorted(times)
    assert len(forest.edges_at(0.0)) == 0
    assert len(forest.edges_at(math.inf)) == len(cfg) - 1
    # prefix grows one edge per event
    for k, ev in enumerate(traj.events):
        assert len(forest.edges_at(ev.time)) == k + 1


def test_monotone_components_match_static_forest():
    for seed in range(20):
        cfg, clocks = random_instance(seed)
        traj = run_trajectory(cfg, clocks, RngStream(seed), 1e9)
        forest = build_monotone_forest(traj)
        for q in (0.1, 0.6, 1.3, 3.0):
            static, _ = breadth_first_forest(cfg, clocks, q)
            assert forest.components_at(q) == frozenset(static.components())
