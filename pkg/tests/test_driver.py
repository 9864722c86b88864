import numpy as np
import pytest

from qta.clustering import check_labeling, extract_clusters
from qta.driver import (
    BASELINE_LABEL,
    BaselineConfig,
    InsufficientBudgetError,
    QtaConfig,
    insertion_move,
    run_baseline,
    run_qta,
)
from qta.initializer import InitConfig, random_labeling
from qta.instances import DistanceMode, load_instance, make_instance
from qta.oracle import OracleLedger, sampler_exact, solve_cluster

from .oracles import brute_force_tsp

FAST_INIT = InitConfig(population_size=4, generations=5, migration_period=2)


class CountingSampler:
    def __init__(self):
        self.calls = 0

    def __call__(self, q):
        self.calls += 1
        return sampler_exact(q)


@pytest.fixture(scope="module")
def burma():
    return load_instance("burma14")


def test_insertion_move_changes_one_city(burma):
    rng = np.random.default_rng(0)
    lab = random_labeling(burma, 10, 1)
    for _ in range(300):
        new = insertion_move(lab, rng)
        diff = np.flatnonzero(new != lab)
        assert len(diff) <= 1
        check_labeling(new)
        lab = new


def test_insertion_move_bound_locked():
    lab = np.array([1, 1, 1, 2, 2, 2])
    assert np.array_equal(insertion_move(lab, 0), lab)


def test_insertion_move_single_cluster():
    lab = np.ones(9, dtype=int)
    assert np.array_equal(insertion_move(lab, 0), lab)


def test_zero_budget_is_insufficient(burma):
    s = CountingSampler()
    with pytest.raises(InsufficientBudgetError):
        run_qta(burma, QtaConfig(budget=0, init="random"), 0, sampler=s)
    assert s.calls == 0


def test_budget_below_first_cluster_count(burma):
    with pytest.raises(InsufficientBudgetError):
        run_qta(burma, QtaConfig(budget=1, init="random"), 0, sampler=CountingSampler())


@pytest.mark.parametrize("init", ["random", "covns"])
def test_run_respects_budget_and_counts_exactly(burma, init):
    s = CountingSampler()
    res = run_qta(burma, QtaConfig(budget=12, init=init, init_config=FAST_INIT), 3, sampler=s)
    assert res.accesses == s.calls == res.ledger.miss_count <= 12
    assert sorted(res.tour) == list(range(14))


def test_incumbent_never_worsens(burma):
    res = run_qta(burma, QtaConfig(budget=20, init="random"), 5, sampler=sampler_exact)
    inc = [r.incumbent_cost for r in res.history]
    assert all(b <= a for a, b in zip(inc, inc[1:]))
    assert inc[-1] == res.cost
    assert res.stop_reason in ("budget", "iteration-cap")


def test_iteration_cap_stops_cache_loop():
    # 6 cities in two clusters of 3: every labeling is bound-locked, so the cache absorbs everything
    pts = [[0, 0], [1, 0], [0, 1], [10, 10], [11, 10], [10, 11]]
    inst = make_instance("six", pts, DistanceMode.EUC2D_REAL)
    res = run_qta(inst, QtaConfig(budget=40, init="random", max_cluster_size=3), 0, sampler=sampler_exact)
    assert res.stop_reason == "iteration-cap"
    assert len(res.history) == 1 + 10 * 40
    assert res.accesses == 2
    assert res.ledger.hit_count == 2 * 10 * 40


def test_labeling_cycle_is_free_after_first_lap(burma):
    s = CountingSampler()
    ledger = OracleLedger(budget=40)
    cycle = [random_labeling(burma, 10, k) for k in range(3)]
    for lab in cycle:
        for c in extract_clusters(lab):
            solve_cluster(ledger, burma, c, s)
    calls = s.calls
    for _ in range(5):
        for lab in cycle:
            for c in extract_clusters(lab):
                solve_cluster(ledger, burma, c, s)
    assert s.calls == calls == ledger.used


def test_deterministic_history(burma):
    cfg = QtaConfig(budget=15, init="covns", init_config=FAST_INIT, reads=10, sweeps=200)
    a = run_qta(burma, cfg, 4)
    b = run_qta(burma, cfg, 4)
    assert a.history == b.history and a.tour == b.tour


def test_restart_flag(burma):
    cfg = QtaConfig(budget=20, init="random", restart_after=3)
    res = run_qta(burma, cfg, 2, sampler=sampler_exact)
    assert res.accesses <= 20


def test_baseline_toy_matches_brute_force():
    rng = np.random.default_rng(0)
    for seed in range(5):
        pts = rng.uniform(0, 50, size=(5, 2))
        inst = make_instance("toy", pts, DistanceMode.EUC2D_REAL)
        res = run_baseline(inst, BaselineConfig(patience=20), seed)
        assert res.rounds >= 20
        assert res.cost == pytest.approx(brute_force_tsp(inst.dist.tolist(), range(5)))
        assert res.label == BASELINE_LABEL


def test_baseline_deterministic_and_expensive(burma):
    a = run_baseline(burma, rng_seed=1)
    b = run_baseline(burma, rng_seed=1)
    assert a == b
    assert sorted(a.tour) == list(range(14))
    assert a.access_equivalent > 40
