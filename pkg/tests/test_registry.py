import itertools
import math

import numpy as np
import pytest

from mcs_crossval import PrivacyAction, RegistryParams, Worker, WorkerRegistry, apply_privacy_action, selection_weight


def test_zero_elapsed_weight():
    assert selection_weight(Worker("a", reputation=3.0, last_offer_time=5.0), 5.0) == 0.0


def test_weight_value():
    w = Worker("a", reputation=0.9, elasticity=1.0, last_offer_time=0.0)
    assert math.isclose(selection_weight(w, 1.0), 1 - math.exp(-1), rel_tol=1e-12)
    assert round(selection_weight(w, 1.0), 6) == 0.632121


def test_opted_out_weight_is_zero():
    assert selection_weight(Worker("a", reputation=10.0, elasticity=0.0), 1e6) == 0.0


def test_clock_regression():
    with pytest.raises(ValueError, match="clock regression"):
        selection_weight(Worker("a", last_offer_time=10.0), 5.0)


@pytest.mark.parametrize(
    "lam, action, expected",
    [(1.0, "more", 1.2), (1.5, "more", 1.6), (0.1, "less", 0.1), (0.9, "less", 0.7), (1.3, "stop", 0.0), (0.0, "more", 0.2)],
)
def test_privacy_actions(lam, action, expected):
    w = apply_privacy_action(Worker("a", elasticity=lam), action)
    assert math.isclose(w.elasticity, expected, abs_tol=1e-12)


def test_bad_action():
    with pytest.raises(ValueError):
        apply_privacy_action(Worker("a"), "louder")


def test_params_validated():
    with pytest.raises(ValueError):
        RegistryParams(epsilon=0)
    with pytest.raises(ValueError):
        RegistryParams(lambda_init=2.0)


def make_registry(n, reputation=None, elasticity=None, contributors=()):
    workers = [
        Worker(
            f"w{i}",
            reputation=0.0 if reputation is None else reputation[i],
            elasticity=1.0 if elasticity is None else elasticity[i],
            is_contributor=i in contributors,
        )
        for i in range(n)
    ]
    return WorkerRegistry(workers)


def test_pool_capped(rng):
    reg = make_registry(1)
    assert reg.select_raters(reg.candidate_pool(), 1.0, 3, rng).tolist() == [0]


def test_zero_weight_never_picked(rng):
    reg = make_registry(2, elasticity=[1.0, 1.0])
    reg.last_offer[1] = 1.0  # no time has passed for worker 1
    for _ in range(200):
        r = reg.copy()
        assert r.select_raters(np.array([0, 1]), 1.0, 1, rng).tolist() == [0]
        assert r.select_raters(np.array([1]), 1.0, 1, rng).size == 0


def test_symmetric_split(rng):
    reg = make_registry(2)
    picks = [reg.copy().select_raters(np.array([0, 1]), 1.0, 1, rng)[0] for _ in range(10_000)]
    assert abs(np.mean(np.array(picks) == 0) - 0.5) < 0.02


def test_pool_excludes_contributors_and_opted_out():
    reg = make_registry(5, elasticity=[1, 0, 1, 1, 1], contributors={3})
    assert reg.candidate_pool().tolist() == [0, 2, 4]


def test_selection_stamps_offer_time(rng):
    reg = make_registry(4)
    chosen = reg.select_raters(reg.candidate_pool(), 7.0, 2, rng)
    assert len(set(chosen.tolist())) == 2
    assert np.all(reg.last_offer[chosen] == 7.0)
    rest = np.setdiff1d(np.arange(4), chosen)
    assert np.all(reg.last_offer[rest] == 0.0)


def sequential_order_probability(weights, order):
    """Chance that draw-remove-renormalise picks exactly ``order`` first."""
    w = list(weights)
    prob = 1.0
    left = set(range(len(w)))
    for i in order:
        prob *= w[i] / sum(w[j] for j in left)
        left.remove(i)
    return prob


def test_matches_sequential_draws():
    # exponential-key selection must reproduce ordered sequential draws
    reg = make_registry(4, reputation=[0.0, 0.5, 1.0, 3.0])
    weights = reg.selection_weights(np.arange(4), 1.0)
    trials = 40_000
    rng = np.random.default_rng(5)
    counts = {}
    for _ in range(trials):
        key = tuple(reg.copy().select_raters(np.arange(4), 1.0, 2, rng).tolist())
        counts[key] = counts.get(key, 0) + 1
    for order in itertools.permutations(range(4), 2):
        expected = sequential_order_probability(weights, order)
        assert abs(counts.get(order, 0) / trials - expected) < 0.01, order


def test_json_round_trip(tmp_path):
    reg = make_registry(3, reputation=[0.1, 0.2, 0.3], contributors={1})
    reg.save(tmp_path / "reg.json")
    again = WorkerRegistry.load(tmp_path / "reg.json")
    assert again.workers() == reg.workers()


def test_registry_validation():
    with pytest.raises(ValueError, match="duplicate"):
        WorkerRegistry([Worker("a"), Worker("a")])
    with pytest.raises(ValueError):
        WorkerRegistry([Worker("a", reputation=-1)])


def test_registry_privacy_action():
    reg = make_registry(1)
    reg.apply_privacy_action(0, PrivacyAction.STOP)
    assert reg[0].elasticity == 0.0
    assert reg.candidate_pool().size == 0
