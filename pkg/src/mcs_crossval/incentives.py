"""Post-campaign reputation updates for raters and payment revision for contributors."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .registry import WorkerRegistry
from .reshaping import Rating

# pi_c(u_c, u_{-c}) -> payment
PaymentFunction = Callable[[float, Sequence[float]], float]


def linear_payment(quality: float, others: Sequence[float]) -> float:
    return float(quality)


PAYMENT_FUNCTIONS: dict[str, PaymentFunction] = {"linear": linear_payment}


def reputation_update(reputation: float, p: float, p_post: float, score: int, max_score: int) -> tuple[float, float]:
    """Reputation change for one effective rating and the clamped new reputation.

    The belief movement is normalised by its headroom (``1 - p`` upwards,
    ``p`` downwards) and signed by the rating, so agreeing with the verdict
    earns credit and opposing it costs. No movement, no change.
    """
    if not 0 < p < 1:
        raise ValueError(f"degenerate interim belief p={p}")
    if score == 0:
        raise ValueError("neutral ratings do not update reputation")
    weight = score / max_score
    if p_post > p:
        delta = (p_post - p) / (1 - p) * weight
    elif p_post < p:
        delta = (p_post - p) / p * weight
    else:
        delta = 0.0
    return delta, max(0.0, reputation + delta)


@dataclass(frozen=True)
class ReputationChange:
    rater_id: str
    before: float
    delta: float
    after: float


@dataclass(frozen=True)
class PaymentRevision:
    contributor_id: str
    original: float
    revised: float
    budgeted: float | None = None


@dataclass
class IncentiveReport:
    raters: list[ReputationChange]
    contributors: list[PaymentRevision]

    def write_raters_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rater_id", "R_before", "delta", "R_after"])
            for r in self.raters:
                w.writerow([r.rater_id, repr(r.before), repr(r.delta), repr(r.after)])

    def write_contributors_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["contributor_id", "pi", "pi_prime", "pi_budget"])
            for c in self.contributors:
                budget = "" if c.budgeted is None else repr(c.budgeted)
                w.writerow([c.contributor_id, repr(c.original), repr(c.revised), budget])


def rate_reputations(
    ratings: Iterable[Rating],
    interim: Sequence[float],
    posterior: Sequence[float],
    max_score: int,
    reputations: Mapping[str, float],
) -> list[ReputationChange]:
    """Reputation changes for every effective rating, given current reputations."""
    changes = []
    for r in ratings:
        before = float(reputations.get(r.rater_id, 0.0))
        delta, after = reputation_update(before, float(interim[r.value_index]), float(posterior[r.value_index]), r.score, max_score)
        changes.append(ReputationChange(r.rater_id, before, delta, after))
    return changes


def update_reputations(
    registry: WorkerRegistry,
    ratings: Iterable[Rating],
    interim: Sequence[float],
    posterior: Sequence[float],
    max_score: int,
) -> list[ReputationChange]:
    """Apply reputation changes to the registry at campaign end.

    Only effective raters are touched; neutral or silent ones keep their
    reputation.
    """
    ratings = list(ratings)
    current = {r.rater_id: float(registry.reputation[registry.index(r.rater_id)]) for r in ratings}
    changes = rate_reputations(ratings, interim, posterior, max_score, current)
    for c in changes:
        registry.reputation[registry.index(c.rater_id)] = c.after
    return changes


def revise_payments(
    payment_fn: PaymentFunction,
    contributions: Mapping[str, tuple[float, int]],
    interim: Sequence[float],
    posterior: Sequence[float],
    budget_mode: bool = False,
) -> list[PaymentRevision]:
    """Re-run the original payment scheme on belief-rectified qualities.

    Every contributor's quality ``u_c`` is scaled by ``p'_i / p_i`` of the
    bin their data fell into, and the unchanged scheme is evaluated on the
    rectified qualities. In budget mode the revised payments are rescaled
    so their total matches the original total.
    """
    ids = list(contributions)
    u = np.array([float(contributions[c][0]) for c in ids])
    bins = [int(contributions[c][1]) for c in ids]
    p = np.asarray(interim, dtype=float)
    q = np.asarray(posterior, dtype=float)
    if np.any(u < 0):
        raise ValueError("qualities must be nonnegative")
    if ids and np.any(p[bins] <= 0):
        raise ValueError("every contributor's bin needs a positive interim belief")
    rectified = u * (q[bins] / p[bins]) if ids else u

    def evaluate(qualities: np.ndarray) -> np.ndarray:
        out = np.empty(qualities.size)
        for k in range(qualities.size):
            others = np.delete(qualities, k)
            out[k] = payment_fn(float(qualities[k]), others)
        return out

    original = evaluate(u)
    revised = evaluate(rectified)
    budgeted: list[float | None] = [None] * len(ids)
    if budget_mode:
        total, total_rev = original.sum(), revised.sum()
        if total_rev == 0:
            if total > 0:
                raise ValueError("budget renormalization undefined: revised payments sum to zero")
            budgeted = [0.0] * len(ids)
        else:
            budgeted = list(revised / total_rev * total)
    return [
        PaymentRevision(c, float(original[k]), float(revised[k]), None if budgeted[k] is None else float(budgeted[k]))
        for k, c in enumerate(ids)
    ]


def read_contributions_csv(path: str | Path) -> dict[str, tuple[float, int]]:
    """Load ``contributor_id,value_index[,quality]`` rows; quality defaults to 1."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"contributor_id", "value_index"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(sorted(missing))}")
        for row in reader:
            quality = row.get("quality") or "1"
            out[row["contributor_id"]] = (float(quality), int(row["value_index"]))
    return out


def write_contributions_csv(contributions: Mapping[str, tuple[float, int]], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["contributor_id", "value_index", "quality"])
        for c, (u, i) in contributions.items():
            w.writerow([c, i, repr(float(u))])
