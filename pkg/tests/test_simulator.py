import json

import numpy as np
import pytest

from mcs_crossval import BehaviorParams, CampaignConfig, Peak, RatingTask, ScenarioSpec, build_profile, generate_dataset, run_scenario, simulate_response
from mcs_crossval.simulator import RaterBehavior, load_spec


def task(value):
    return RatingTask(0, float(value), 0, "", (), "w", 0, 0.0)


def test_rater_agrees_within_threshold(rng):
    rater = RaterBehavior(acceptance=1.0, estimate=45.0, threshold=4.5)
    assert simulate_response(rater, task(45), 0.0, rng).score == 1
    assert simulate_response(rater, task(72), 0.0, rng).score == -1


def test_never_accepting_rater(rng):
    rater = RaterBehavior(acceptance=0.0, estimate=45.0, threshold=4.5)
    outcomes = [simulate_response(rater, task(45), 3.0, rng) for _ in range(2000)]
    assert all(o is None or o.score == 0 for o in outcomes)
    neutral = sum(o is not None for o in outcomes)
    assert 900 < neutral < 1100
    assert all(o.arrival_time >= 3.0 for o in outcomes if o is not None)


def test_privacy_actions_drawn(rng):
    rater = RaterBehavior(1.0, 45.0, 4.5)
    params = BehaviorParams(p_stop=1.0)
    assert simulate_response(rater, task(45), 0.0, rng, params).privacy_action.value == "stop"


def profile_of(spec, seed=0):
    return build_profile(generate_dataset(spec, np.random.default_rng(seed)), spec.bin_width)


def test_case_a_heavy_peaks_top_two():
    spec = ScenarioSpec(case="A", peaks=(Peak(45, 0.25, 2.0), Peak(72, 0.22, 2.0)))
    for seed in range(5):
        prof = profile_of(spec, seed)
        top = sorted(np.argsort(prof.masses)[-2:].tolist())
        assert top == sorted([prof.index_of(45), prof.index_of(72)])


def test_case_b_hidden_share():
    spec = ScenarioSpec(case="B", hidden_fraction=0.03)
    shares = [profile_of(spec, s).masses[profile_of(spec, s).index_of(20)] for s in range(10)]
    # binomial s.d. at n=1000 is about 0.0054
    assert all(abs(x - 0.03) < 4 * 0.0054 for x in shares)


def test_zero_noise_single_peak_is_point_mass():
    spec = ScenarioSpec(case="A", peaks=(Peak(45, 1.0, 0.0),))
    prof = profile_of(spec)
    assert prof.values.tolist() == [45.0] and prof.masses.tolist() == [1.0]


def test_grid_anchored_at_range_minimum():
    prof = profile_of(ScenarioSpec())
    assert prof.anchor == 10.0


def test_m_zero_leaves_beliefs_alone():
    spec = ScenarioSpec(population=3000, contributors=200, campaign=CampaignConfig(m=0))
    rep = run_scenario(spec)
    for run in rep.runs.values():
        assert np.array_equal(run.reshaped.posterior, rep.profile.masses)


def test_failed_campaign_keeps_interim():
    spec = ScenarioSpec(population=1100, contributors=1000, campaign=CampaignConfig(m=1000))
    rep = run_scenario(spec, strategies=[])
    assert rep.summary()["outcome"] == "FAIL" and rep.summary()["shortfall"] > 0
    assert np.array_equal(rep.primary.reshaped.posterior, rep.profile.masses)


def test_case_a_proportional_reinforces_truth():
    ratios = {}
    for seed in range(5):
        rep = run_scenario(ScenarioSpec(case="A", seed=seed), strategies=["proportional"])
        ratios.setdefault("truth", []).append(rep.truth_ratio("proportional"))
        ratios.setdefault("false", []).append(rep.ratio_at("proportional", rep.false_bins[72.0]))
    assert np.median(ratios["truth"]) > 1
    assert np.median(ratios["truth"]) > np.median(ratios["false"])


def test_case_b_reverse_surfaces_truth():
    truth, false = [], []
    for seed in range(5):
        rep = run_scenario(ScenarioSpec(case="B", seed=seed), strategies=["reverse"])
        truth.append(rep.truth_ratio("reverse"))
        false.append([rep.ratio_at("reverse", i) for i in rep.false_bins.values()])
    assert np.median(truth) > 1
    assert np.all(np.median(false, axis=0) < 1)


def test_spec_validation():
    with pytest.raises(ValueError, match="case"):
        ScenarioSpec(case="C")
    with pytest.raises(ValueError, match="> 1"):
        ScenarioSpec(peaks=(Peak(45, 0.7), Peak(72, 0.6)))
    with pytest.raises(ValueError, match="unknown"):
        ScenarioSpec.from_dict({"cases": "A"})


def test_spec_round_trip(tmp_path):
    spec = ScenarioSpec(case="B", seed=3, campaign=CampaignConfig(m=50, strategy="inverse"))
    (tmp_path / "s.json").write_text(json.dumps(spec.to_dict()))
    assert load_spec(tmp_path / "s.json") == spec


def test_report_directory(tmp_path):
    rep = run_scenario(ScenarioSpec(case="B", population=5000, contributors=500, campaign=CampaignConfig(m=200), seed=2))
    rep.write(tmp_path)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert "posterior_ratio_at_truth" in summary
    assert {row["strategy"] for row in summary["strategies"]} == {"random", "proportional", "reverse", "inverse"}
    for name in ("reshaped_random.csv", "cycle_stats.csv", "incentives_contributors.csv", "profile.json"):
        assert (tmp_path / name).is_file()
