"""Consolidating effective ratings with the interim profile into a posterior."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .profiling import Profile

THREE_LEVEL_LABELS = ("Disagree", "Neutral", "Agree")
FIVE_LEVEL_LABELS = ("Very unlikely", "Unlikely", "Not sure", "Likely", "Very likely")


@dataclass(frozen=True)
class RatingScale:
    """Symmetric integer scores ``{-w_l, ..., -w_1, 0, w_1, ..., w_l}`` with labels."""

    scores: tuple[int, ...] = (-1, 0, 1)
    labels: tuple[str, ...] = THREE_LEVEL_LABELS

    def __post_init__(self):
        s = tuple(int(x) for x in self.scores)
        object.__setattr__(self, "scores", s)
        if len(self.labels) != len(s):
            raise ValueError("one label per score is required")
        if 0 not in s:
            raise ValueError("rating scale must contain the neutral score 0")
        if any(a >= b for a, b in zip(s, s[1:])):
            raise ValueError("scores must be strictly increasing")
        if tuple(-x for x in reversed(s)) != s:
            raise ValueError("scores must be symmetric about 0")

    @classmethod
    def from_scores(cls, scores: Sequence[int], labels: Sequence[str] | None = None) -> RatingScale:
        scores = tuple(sorted(int(x) for x in scores))
        if labels is None:
            if len(scores) == 3:
                labels = THREE_LEVEL_LABELS
            elif len(scores) == 5:
                labels = FIVE_LEVEL_LABELS
            else:
                labels = tuple(str(x) for x in scores)
        return cls(scores, tuple(labels))

    @property
    def max_score(self) -> int:
        return self.scores[-1]

    @property
    def options(self) -> tuple[tuple[str, int], ...]:
        return tuple(zip(self.labels, self.scores))

    def __contains__(self, score: object) -> bool:
        return score in self.scores


@dataclass(frozen=True)
class Rating:
    rater_id: str
    value_index: int
    score: int
    received_time: float = 0.0

    @property
    def effective(self) -> bool:
        return self.score != 0


@dataclass(frozen=True)
class BinTally:
    positive: np.ndarray  # g_i
    negative: np.ndarray  # b_i
    counts: np.ndarray  # raw effective ratings per bin

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def tally_ratings(ratings: Iterable[Rating], scale: RatingScale, n: int) -> BinTally:
    """Normalised positive and negative rating mass per bin.

    Scores are divided by the top score ``w_l`` so a full-strength rating
    counts as one.
    """
    g = np.zeros(n)
    b = np.zeros(n)
    counts = np.zeros(n, dtype=np.int64)
    w = scale.max_score
    for r in ratings:
        if r.score == 0:
            raise ValueError(f"neutral rating leaked into effective set (rater {r.rater_id})")
        if r.score not in scale:
            raise ValueError(f"score {r.score} from rater {r.rater_id} is not on the scale {scale.scores}")
        if not 0 <= r.value_index < n:
            raise ValueError(f"rating from {r.rater_id} references bin {r.value_index} outside 0..{n - 1}")
        if r.score > 0:
            g[r.value_index] += r.score / w
        else:
            b[r.value_index] -= r.score / w
        counts[r.value_index] += 1
    return BinTally(g, b, counts)


@dataclass(frozen=True)
class ReshapedProfile:
    values: np.ndarray
    interim: np.ndarray
    posterior: np.ndarray
    positive: np.ndarray
    negative: np.ndarray
    eta: float
    n_effective: int

    def __len__(self) -> int:
        return self.values.size

    @property
    def ratios(self) -> np.ndarray:
        return self.posterior / self.interim

    def to_dict(self) -> dict:
        return {
            "eta": self.eta,
            "n_effective": self.n_effective,
            "bins": [
                {"v": float(v), "p_interim": float(p), "p_posterior": float(q), "g": float(g), "b": float(b)}
                for v, p, q, g, b in zip(self.values, self.interim, self.posterior, self.positive, self.negative)
            ],
        }

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["v", "p_interim", "p_posterior", "g", "b"])
            for row in zip(self.values, self.interim, self.posterior, self.positive, self.negative):
                w.writerow([repr(float(x)) for x in row])

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def read_csv(cls, path: str | Path) -> ReshapedProfile:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        col = lambda k: np.array([float(r[k]) for r in rows])  # noqa: E731
        return cls(col("v"), col("p_interim"), col("p_posterior"), col("g"), col("b"), eta=float("nan"), n_effective=-1)


def reshape(
    profile: Profile | Sequence[float],
    tally: BinTally,
    n_effective: int | None = None,
    eta: float = 1.0,
    values: Sequence[float] | None = None,
) -> ReshapedProfile:
    """Posterior beliefs from the interim masses and the rating tally.

    Each bin becomes ``(p + eta*g/|R|) / (1 + eta*(g+b)/|R|)`` and the result
    is renormalised. ``|R|`` is the number of effective ratings, which
    defaults to the tally's own count. With no ratings, or ``eta == 0``, the
    posterior is the interim belief unchanged.
    """
    if isinstance(profile, Profile):
        p = profile.masses
        values = profile.values
    else:
        p = np.asarray(profile, dtype=float)
        values = np.asarray(values if values is not None else np.arange(p.size), dtype=float)
    if p.size != tally.positive.size:
        raise ValueError(f"tally covers {tally.positive.size} bins, profile has {p.size}")
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    if n_effective is None:
        n_effective = tally.total
    elif n_effective != tally.total:
        raise ValueError(f"inconsistent rating count: |R|={n_effective} but the tally holds {tally.total}")
    g, b = tally.positive, tally.negative

    if n_effective == 0 or eta == 0:
        posterior = p.copy()
    else:
        scale = eta / n_effective
        raw = (p + scale * g) / (1.0 + scale * (g + b))
        posterior = raw / raw.sum()
    return ReshapedProfile(values, p.copy(), posterior, g.copy(), b.copy(), float(eta), int(n_effective))
