import math

import numpy as np
import pytest

from mcs_crossval import Rating, Worker, WorkerRegistry, linear_payment, reputation_update, revise_payments, update_reputations
from mcs_crossval.incentives import IncentiveReport, read_contributions_csv, write_contributions_csv


def test_reward_and_penalty():
    assert reputation_update(0.0, 0.5, 0.75, 1, 1) == (0.5, 0.5)
    delta, new = reputation_update(1.0, 0.5, 0.25, 1, 1)
    assert delta == -0.5 and new == 0.5


def test_negative_rating_flips_sign():
    delta, _ = reputation_update(1.0, 0.5, 0.25, -1, 1)
    assert delta == 0.5


def test_unmoved_belief():
    assert reputation_update(0.7, 0.4, 0.4, 1, 1) == (0.0, 0.7)


def test_floor():
    delta, new = reputation_update(0.2, 0.5, 0.25, 1, 1)
    assert delta == -0.5 and new == 0.0


def test_scale_weight():
    delta, _ = reputation_update(0.0, 0.5, 0.75, 1, 2)
    assert delta == 0.25


def test_degenerate_belief():
    with pytest.raises(ValueError, match="degenerate"):
        reputation_update(0, 1.0, 1.0, 1, 1)


def test_linear_revision():
    rev = revise_payments(linear_payment, {"c": (2.0, 0)}, [0.5, 0.5], [0.6, 0.4])
    assert math.isclose(rev[0].revised, 2.4)
    assert rev[0].original == 2.0 and rev[0].budgeted is None


def test_unchanged_posterior_keeps_payments():
    contributions = {"a": (1.0, 0), "b": (3.0, 1)}
    rev = revise_payments(linear_payment, contributions, [0.2, 0.8], [0.2, 0.8])
    assert [x.revised for x in rev] == [x.original for x in rev]


def test_budget_mode():
    # rectified qualities 2 and 4, original total 3
    contributions = {"a": (1.0, 0), "b": (2.0, 1)}
    rev = revise_payments(linear_payment, contributions, [0.25, 0.25, 0.5], [0.5, 0.5, 0.0], budget_mode=True)
    assert [x.revised for x in rev] == [2.0, 4.0]
    assert np.allclose([x.budgeted for x in rev], [1.0, 2.0])


def test_budget_mode_undefined():
    with pytest.raises(ValueError, match="budget renormalization undefined"):
        revise_payments(linear_payment, {"a": (1.0, 0)}, [0.5, 0.5], [0.0, 1.0], budget_mode=True)


def test_payment_function_sees_others():
    seen = []

    def share(u, others):
        seen.append(sorted(others))
        return u / (u + sum(others))

    rev = revise_payments(share, {"a": (1.0, 0), "b": (3.0, 1)}, [0.5, 0.5], [0.5, 0.5])
    assert [x.original for x in rev] == [0.25, 0.75]
    assert seen[0] == [3.0]


def test_registry_update_touches_only_raters():
    reg = WorkerRegistry([Worker("a"), Worker("b", reputation=0.3), Worker("c", reputation=1.0)])
    ratings = [Rating("a", 0, 1, 1.0), Rating("b", 0, -1, 1.0)]
    changes = update_reputations(reg, ratings, [0.5, 0.5], [0.75, 0.25], 1)
    assert [c.after for c in changes] == [0.5, 0.0]
    assert reg.reputation.tolist() == [0.5, 0.0, 1.0]


def test_csv_outputs(tmp_path):
    rev = revise_payments(linear_payment, {"a": (1.0, 0)}, [0.5, 0.5], [0.6, 0.4], budget_mode=True)
    report = IncentiveReport([], rev)
    report.write_contributors_csv(tmp_path / "c.csv")
    report.write_raters_csv(tmp_path / "r.csv")
    assert (tmp_path / "c.csv").read_text().splitlines() == ["contributor_id,pi,pi_prime,pi_budget", "a,1.0,1.2,1.0"]
    assert (tmp_path / "r.csv").read_text() == "rater_id,R_before,delta,R_after\n"
    write_contributions_csv({"x": (2.0, 1)}, tmp_path / "k.csv")
    assert read_contributions_csv(tmp_path / "k.csv") == {"x": (2.0, 1)}
    (tmp_path / "k2.csv").write_text("contributor_id,value_index\ny,0\n")
    assert read_contributions_csv(tmp_path / "k2.csv") == {"y": (1.0, 0)}
