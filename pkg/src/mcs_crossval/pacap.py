"""Progressive privacy-aware competency-adaptive push (PACAP).

The campaign divides the deadline into cycles. Each cycle pushes one rating
task to each of ``m(k)`` freshly selected raters, collects whatever answers
arrive, and resizes the next outreach from the effective/neutral ratio seen
so far. Time is a virtual clock; responses are future events in a queue.
"""

from __future__ import annotations

import csv
import heapq
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .profiling import Profile
from .registry import PrivacyAction, WorkerRegistry
from .reshaping import Rating, RatingScale
from .sampling import SamplingStrategy, draw_values, strategy_weights

log = logging.getLogger(__name__)

DEFAULT_DESCRIPTION = "Is the following value representative of the sensed quantity?"


@dataclass(frozen=True)
class CampaignConfig:
    """Parameters of one validation campaign (times in minutes)."""

    m: int = 1000
    alpha: float = 0.1
    deadline: float = 60.0
    cycle: Optional[float] = None  # defaults to deadline / 6
    strategy: SamplingStrategy = SamplingStrategy.REVERSE
    rating_scale: RatingScale = field(default_factory=RatingScale)
    eta: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "strategy", SamplingStrategy.parse(self.strategy))
        if self.cycle is None:
            object.__setattr__(self, "cycle", self.deadline / 6)
        if self.m < 0:
            raise ValueError("m must be nonnegative")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if not (self.deadline > 0 and 0 < self.cycle <= self.deadline):
            raise ValueError("need 0 < cycle <= deadline")
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")

    @property
    def n_cycles(self) -> int:
        return int(math.floor(self.deadline / self.cycle + 1e-9))

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "alpha": self.alpha,
            "deadline": self.deadline,
            "cycle": self.cycle,
            "strategy": self.strategy.value,
            "rating_scale": list(self.rating_scale.scores),
            "rating_labels": list(self.rating_scale.labels),
            "eta": self.eta,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> CampaignConfig:
        data = dict(data)
        known = {"m", "alpha", "deadline", "cycle", "strategy", "rating_scale", "rating_labels", "eta", "seed"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown campaign config key(s): {', '.join(sorted(unknown))}")
        if "rating_scale" in data:
            data["rating_scale"] = RatingScale.from_scores(data["rating_scale"], data.pop("rating_labels", None))
        data.pop("rating_labels", None)
        return cls(**data)


@dataclass(frozen=True)
class RatingTask:
    task_id: int
    value: float
    value_index: int
    description: str
    options: tuple[tuple[str, int], ...]
    rater_id: str
    rater_index: int
    sent_time: float


@dataclass(frozen=True)
class Response:
    """A rater's answer: score 0 is an explicit neutral decline."""

    score: int
    arrival_time: float
    privacy_action: Optional[PrivacyAction] = None


# Returning None means the rater never answers.
Responder = Callable[[RatingTask, float, np.random.Generator], Optional[Response]]


@dataclass
class CycleStats:
    k: int
    offers: int
    effective: int
    neutral: int
    cum_effective: int
    cum_neutral: int


@dataclass
class CampaignResult:
    success: bool
    ratings: list[Rating]
    stats: list[CycleStats]
    tasks: list[RatingTask]
    end_time: float

    @property
    def outcome(self) -> str:
        return "SUCCESS" if self.success else "FAIL"

    @property
    def offers(self) -> int:
        return len(self.tasks)

    def write_stats_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "offers", "effective", "neutral", "cum_effective", "cum_neutral"])
            for s in self.stats:
                w.writerow([s.k, s.offers, s.effective, s.neutral, s.cum_effective, s.cum_neutral])

    def write_ratings_csv(self, path: str | Path) -> None:
        write_ratings_csv(self.ratings, path)


def write_ratings_csv(ratings: list[Rating], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rater_id", "value_index", "score", "received_time"])
        for r in ratings:
            w.writerow([r.rater_id, r.value_index, r.score, repr(float(r.received_time))])


def read_ratings_csv(path: str | Path) -> list[Rating]:
    with open(path, newline="") as fh:
        text = fh.read()
    if not text.strip():
        return []
    rows = csv.DictReader(text.splitlines())
    missing = {"rater_id", "value_index", "score"} - set(rows.fieldnames or ())
    if missing:
        raise ValueError(f"{path}: missing column(s) {', '.join(sorted(missing))}")
    return [
        Rating(r["rater_id"], int(r["value_index"]), int(r["score"]), float(r.get("received_time") or 0.0))
        for r in rows
    ]


def next_outreach(m: int, cum_effective: int, cum_neutral: int, pool_size: int, prev_offers: int) -> int:
    """Number of raters to approach in the next cycle.

    The remaining shortfall ``m - M_Y`` is divided by the observed
    effective-rating rate ``M_Y / (M_Y + M_N)`` and rounded up. Before any
    effective rating has arrived the rate is unknown, so the previous
    outreach is doubled instead. Always capped by the pool.
    """
    if cum_effective < 0 or cum_neutral < 0:
        raise ValueError("counts must be nonnegative")
    if m <= cum_effective:
        raise ValueError(f"target already met ({cum_effective} >= {m})")
    if pool_size <= 0:
        return 0
    if cum_effective == 0:
        return min(pool_size, 2 * prev_offers)
    # exact integer ceiling of (m - M_Y)(M_Y + M_N) / M_Y
    want = -(-(m - cum_effective) * (cum_effective + cum_neutral) // cum_effective)
    return min(pool_size, want)


def run_campaign(
    config: CampaignConfig,
    registry: WorkerRegistry,
    profile: Profile,
    responder: Responder,
    start: float = 0.0,
    rng: np.random.Generator | None = None,
    description: str = DEFAULT_DESCRIPTION,
) -> CampaignResult:
    """Run the progressive push campaign until the target or the deadline.

    Contributors and opted-out workers are never approached, and nobody is
    offered twice. Returns SUCCESS as soon as a cycle ends with at least
    ``m`` effective ratings, otherwise SUCCESS at the deadline iff at least
    ``m * (1 - alpha)`` were collected. Responses are consumed in
    ``(arrival_time, task_id)`` order; any that land before the deadline
    count in the cycle during which they arrive. A responder that raises is
    treated as silent for that task.
    """
    if len(profile) == 0:
        raise ValueError("profile has no bins")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    weights = strategy_weights(profile, config.strategy)
    values = profile.values
    scale = config.rating_scale
    options = scale.options
    deadline = start + config.deadline

    pool = registry.candidate_pool()
    ratings: list[Rating] = []
    tasks: list[RatingTask] = []
    stats: list[CycleStats] = []
    queue: list[tuple[float, int, Response]] = []
    m_k = config.m
    cum_y = cum_n = 0

    for k in range(1, config.n_cycles + 1):
        now = start + (k - 1) * config.cycle
        chosen = registry.select_raters(pool, now, m_k, rng)
        if chosen.size:
            pool = np.setdiff1d(pool, chosen, assume_unique=True)
        picks = draw_values(weights, rng, chosen.size)
        for j, i in zip(chosen.tolist(), picks.tolist()):
            task = RatingTask(
                task_id=len(tasks),
                value=float(values[i]),
                value_index=i,
                description=description,
                options=options,
                rater_id=registry.ids[j],
                rater_index=j,
                sent_time=now,
            )
            tasks.append(task)
            try:
                resp = responder(task, now, rng)
            except Exception:
                log.warning("responder failed on task %d; treating as no response", task.task_id, exc_info=True)
                continue
            if resp is None:
                continue
            if resp.score not in scale or resp.arrival_time < now:
                log.warning("discarding malformed response %r to task %d", resp, task.task_id)
                continue
            heapq.heappush(queue, (resp.arrival_time, task.task_id, resp))

        window_end = deadline if k == config.n_cycles else min(now + config.cycle, deadline)
        m_y = m_n = 0
        while queue and queue[0][0] <= window_end:
            arrival, tid, resp = heapq.heappop(queue)
            task = tasks[tid]
            if resp.score != 0:
                ratings.append(Rating(task.rater_id, task.value_index, resp.score, arrival))
                m_y += 1
            else:
                m_n += 1
            if resp.privacy_action is not None:
                registry.apply_privacy_action(task.rater_index, resp.privacy_action)

        cum_y += m_y
        cum_n += m_n
        stats.append(CycleStats(k, int(chosen.size), m_y, m_n, cum_y, cum_n))
        if len(ratings) >= config.m:
            return CampaignResult(True, ratings, stats, tasks, window_end)
        m_k = next_outreach(config.m, cum_y, cum_n, pool.size, m_k)

    success = len(ratings) >= config.m * (1 - config.alpha)
    return CampaignResult(success, ratings, stats, tasks, deadline)


def load_config(path: str | Path) -> CampaignConfig:
    return CampaignConfig.from_dict(json.loads(Path(path).read_text()))
