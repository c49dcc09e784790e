"""Synthetic traffic-speed world: population, datasets, rater behaviour, scenario runs.

Everything random in a scenario descends from one seed. The world stream
builds the population, the dataset and each rater's private behaviour; the
campaign stream drives selection, sampling and responses, and is replayed
identically for every strategy so that strategies are compared on common
random numbers.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .incentives import PAYMENT_FUNCTIONS, IncentiveReport, revise_payments, update_reputations
from .pacap import CampaignConfig, CampaignResult, RatingTask, Response, run_campaign
from .profiling import Profile, Reading, build_profile, write_profile_csv, write_profile_json, write_readings_csv
from .registry import PrivacyAction, RegistryParams, WorkerRegistry
from .reshaping import ReshapedProfile, reshape, tally_ratings
from .sampling import SamplingStrategy

MINUTES_PER_DAY = 24 * 60.0


@dataclass(frozen=True)
class Peak:
    center: float
    mass: float
    sd: float = 1.0


@dataclass(frozen=True)
class BehaviorParams:
    """Rater model knobs.

    Estimates are ``N(truth, truth_spread)`` and thresholds
    ``N(k*estimate, k*estimate)`` with ``k = threshold_scale``, the second
    parameter read as a variance (``spread_is_variance``, the default) or as
    a standard deviation.
    """

    truth_spread: float = 5.0
    threshold_scale: float = 0.1
    spread_is_variance: bool = True
    mean_delay: float = 15.0
    neutral_share: float = 0.5
    p_more: float = 0.0
    p_less: float = 0.0
    p_stop: float = 0.0

    def __post_init__(self):
        if self.truth_spread < 0 or self.threshold_scale < 0 or self.mean_delay < 0:
            raise ValueError("behaviour spreads and delays must be nonnegative")
        if not 0 <= self.neutral_share <= 1:
            raise ValueError("neutral_share must lie in [0, 1]")
        if min(self.p_more, self.p_less, self.p_stop) < 0 or self.p_more + self.p_less + self.p_stop > 1:
            raise ValueError("privacy action probabilities must be nonnegative and sum to at most 1")


@dataclass(frozen=True)
class RaterBehavior:
    acceptance: float
    estimate: float  # private belief of the truth
    threshold: float


CASE_DEFAULT_TRUTH = {"A": 45.0, "B": 20.0}


def _default_peaks() -> tuple[Peak, ...]:
    return (Peak(45.0, 0.15, 2.0), Peak(72.0, 0.13, 2.0))


@dataclass(frozen=True)
class ScenarioSpec:
    case: str = "A"
    population: int = 50_000
    contributors: int = 1000
    truth: Optional[float] = None
    peaks: tuple[Peak, ...] = field(default_factory=_default_peaks)
    hidden_fraction: float = 0.01
    hidden_sd: float = 1.0
    value_range: tuple[float, float] = (10.0, 95.0)
    resolution: float = 1.0
    bin_width: float = 5.0
    signup_horizon: float = 30 * MINUTES_PER_DAY
    campaign: CampaignConfig = field(default_factory=CampaignConfig)
    behavior: BehaviorParams = field(default_factory=BehaviorParams)
    registry: RegistryParams = field(default_factory=RegistryParams)
    payment: str = "linear"
    budget_mode: bool = False
    seed: int = 0

    def __post_init__(self):
        case = str(self.case).upper()
        object.__setattr__(self, "case", case)
        if case not in CASE_DEFAULT_TRUTH:
            raise ValueError(f"case must be A or B, got {self.case!r}")
        if self.truth is None:
            object.__setattr__(self, "truth", CASE_DEFAULT_TRUTH[case])
        object.__setattr__(self, "peaks", tuple(p if isinstance(p, Peak) else Peak(**p) for p in self.peaks))
        object.__setattr__(self, "value_range", tuple(float(x) for x in self.value_range))
        if not 0 < self.contributors < self.population:
            raise ValueError("need 0 < contributors < population")
        lo, hi = self.value_range
        if not lo < hi:
            raise ValueError("value_range must be increasing")
        if any(p.mass < 0 or p.sd < 0 for p in self.peaks) or self.hidden_fraction < 0:
            raise ValueError("masses and spreads must be nonnegative")
        if self.signal_mass > 1 + 1e-12:
            raise ValueError(f"peak masses sum to {self.signal_mass:.6g} > 1")
        if not all(lo <= p.center <= hi for p in self.peaks) or not lo <= self.truth <= hi:
            raise ValueError("peaks and truth must lie inside value_range")
        if self.payment not in PAYMENT_FUNCTIONS:
            raise ValueError(f"unknown payment function {self.payment!r}")

    @property
    def signal_mass(self) -> float:
        extra = self.hidden_fraction if self.case == "B" else 0.0
        return sum(p.mass for p in self.peaks) + extra

    def with_overrides(self, **changes) -> ScenarioSpec:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "population": self.population,
            "contributors": self.contributors,
            "truth": self.truth,
            "peaks": [asdict(p) for p in self.peaks],
            "hidden_fraction": self.hidden_fraction,
            "hidden_sd": self.hidden_sd,
            "value_range": list(self.value_range),
            "resolution": self.resolution,
            "bin_width": self.bin_width,
            "signup_horizon": self.signup_horizon,
            "campaign": self.campaign.to_dict(),
            "behavior": asdict(self.behavior),
            "registry": asdict(self.registry),
            "payment": self.payment,
            "budget_mode": self.budget_mode,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> ScenarioSpec:
        data = dict(data)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown scenario key(s): {', '.join(sorted(unknown))}")
        if "campaign" in data:
            data["campaign"] = CampaignConfig.from_dict(data["campaign"])
        if "behavior" in data:
            data["behavior"] = BehaviorParams(**data["behavior"])
        if "registry" in data:
            data["registry"] = RegistryParams(**data["registry"])
        if "peaks" in data:
            data["peaks"] = tuple(Peak(**p) for p in data["peaks"])
        return cls(**data)


def _quantize(x: np.ndarray, resolution: float) -> np.ndarray:
    if resolution <= 0:
        return x
    return np.round(x / resolution) * resolution


def _draw_in(rng: np.random.Generator, size: int, center: float, sd: float, lo: float, hi: float, resolution: float) -> np.ndarray:
    """Quantised normal draws, redrawn until they land in ``[lo, hi)``."""
    out = np.empty(0)
    while out.size < size:
        x = _quantize(rng.normal(center, sd, size - out.size), resolution)
        out = np.concatenate([out, x[(x >= lo) & (x < hi)]])
    return out


def generate_dataset(spec: ScenarioSpec, rng: np.random.Generator, contributor_ids: Optional[list[str]] = None) -> list[Reading]:
    """Crowd-sensed speeds with the qualitative structure of the scenario.

    Case A: dominant modes at the peak centres (the truth among them) over a
    flat noise floor. Case B: the same false modes, the truth carried by
    ``hidden_fraction`` of the readings in its own bin, noise elsewhere.
    Values are quantised to ``resolution``; when there are at least two
    noise readings the range endpoints are among them, so the histogram
    grid is anchored at the range minimum.
    """
    n = spec.contributors
    if contributor_ids is None:
        contributor_ids = [f"c{i:05d}" for i in range(n)]
    lo, hi = spec.value_range
    w = spec.bin_width
    masses = [p.mass for p in spec.peaks]
    if spec.case == "B":
        masses.append(spec.hidden_fraction)
    noise_mass = max(0.0, 1.0 - sum(masses))
    probs = np.array(masses + [noise_mass])
    counts = rng.multinomial(n, probs / probs.sum())

    chunks = []
    top = hi + spec.resolution / 2 if spec.resolution > 0 else math.nextafter(hi, math.inf)
    for peak, c in zip(spec.peaks, counts):
        chunks.append(_draw_in(rng, int(c), peak.center, peak.sd, lo, top, spec.resolution))
    hidden_bin = None
    if spec.case == "B":
        hidden_bin = math.floor((spec.truth - lo) / w)
        blo = lo + hidden_bin * w
        chunks.append(_draw_in(rng, int(counts[len(spec.peaks)]), spec.truth, spec.hidden_sd, blo, blo + w, spec.resolution))

    n_noise = int(counts[-1])
    noise = _noise(rng, n_noise, lo, hi, w, spec.resolution, hidden_bin)
    chunks.append(noise)
    values = np.concatenate(chunks)
    return [Reading(float(v), cid) for v, cid in zip(values, contributor_ids)]


def _noise(rng, size, lo, hi, w, resolution, exclude_bin):
    if size == 0:
        return np.empty(0)
    if resolution > 0:
        grid = lo + resolution * np.arange(int(round((hi - lo) / resolution)) + 1)
        if exclude_bin is not None:
            grid = grid[np.floor((grid - lo) / w) != exclude_bin]
        body = rng.choice(grid, size=size)
    else:
        body = rng.uniform(lo, hi, size)
        if exclude_bin is not None:
            inside = np.floor((body - lo) / w) == exclude_bin
            body[inside] = (body[inside] + w - lo) % (hi - lo) + lo
    if size >= 2:
        body[0], body[1] = lo, hi
    return body


@dataclass
class Population:
    """The worker registry plus each worker's private rater behaviour."""

    registry: WorkerRegistry
    acceptance: np.ndarray
    estimate: np.ndarray
    threshold: np.ndarray
    contributor_ids: list[str]

    def behavior(self, j: int) -> RaterBehavior:
        return RaterBehavior(float(self.acceptance[j]), float(self.estimate[j]), float(self.threshold[j]))

    def responder(self, params: BehaviorParams):
        def respond(task: RatingTask, now: float, rng: np.random.Generator) -> Optional[Response]:
            return simulate_response(self.behavior(task.rater_index), task, now, rng, params)

        return respond


def generate_population(spec: ScenarioSpec, rng: np.random.Generator) -> Population:
    n = spec.population
    ids = [f"w{i:05d}" for i in range(n)]
    signup = -rng.uniform(0.0, spec.signup_horizon, n)
    contributors = np.sort(rng.choice(n, size=spec.contributors, replace=False))
    is_contributor = np.zeros(n, dtype=bool)
    is_contributor[contributors] = True
    registry = WorkerRegistry.from_arrays(ids, signup, spec.registry, is_contributor)

    b = spec.behavior
    spread = math.sqrt(b.truth_spread) if b.spread_is_variance else b.truth_spread
    acceptance = rng.uniform(0.0, 1.0, n)
    estimate = rng.normal(spec.truth, spread, n)
    th_mean = b.threshold_scale * estimate
    th_sd = np.sqrt(np.abs(th_mean)) if b.spread_is_variance else np.abs(th_mean)
    threshold = np.maximum(0.0, rng.normal(th_mean, th_sd))
    return Population(registry, acceptance, estimate, threshold, [ids[i] for i in contributors])


def simulate_response(
    behavior: RaterBehavior,
    task: RatingTask,
    now: float,
    rng: np.random.Generator,
    params: BehaviorParams = BehaviorParams(),
) -> Optional[Response]:
    """One rater's reaction to an offer.

    With probability ``a_j`` the rater accepts and scores +1 when the offered
    value is within their threshold of their own estimate, else -1. Otherwise
    they decline with an explicit neutral (``neutral_share`` of the time) or
    stay silent. Answers arrive after an exponential delay.
    """
    if rng.random() < behavior.acceptance:
        score = 1 if abs(task.value - behavior.estimate) <= behavior.threshold else -1
    elif rng.random() < params.neutral_share:
        score = 0
    else:
        return None
    arrival = now + rng.exponential(params.mean_delay)
    action = None
    if params.p_more or params.p_less or params.p_stop:
        u = rng.random()
        if u < params.p_more:
            action = PrivacyAction.MORE
        elif u < params.p_more + params.p_less:
            action = PrivacyAction.LESS
        elif u < params.p_more + params.p_less + params.p_stop:
            action = PrivacyAction.STOP
    return Response(score, arrival, action)


@dataclass
class StrategyRun:
    strategy: SamplingStrategy
    campaign: CampaignResult
    reshaped: ReshapedProfile
    incentives: IncentiveReport


@dataclass
class ScenarioReport:
    spec: ScenarioSpec
    readings: list[Reading]
    profile: Profile
    truth_bin: Optional[int]
    false_bins: dict[float, int]
    runs: dict[SamplingStrategy, StrategyRun]

    @property
    def primary(self) -> StrategyRun:
        return self.runs[self.spec.campaign.strategy]

    def ratio_at(self, strategy: SamplingStrategy | str, i: Optional[int]) -> float:
        if i is None:
            return float("nan")
        return float(self.runs[SamplingStrategy.parse(strategy)].reshaped.ratios[i])

    def truth_ratio(self, strategy: SamplingStrategy | str) -> float:
        return self.ratio_at(strategy, self.truth_bin)

    def strategy_rows(self) -> list[dict]:
        rows = []
        for s, run in self.runs.items():
            row = {
                "strategy": s.value,
                "outcome": run.campaign.outcome,
                "offers": run.campaign.offers,
                "n_effective": len(run.campaign.ratings),
                "ratio_at_truth": self.truth_ratio(s),
            }
            for center, i in self.false_bins.items():
                row[f"ratio_at_{center:g}"] = self.ratio_at(s, i)
            rows.append(row)
        return rows

    def summary(self) -> dict:
        primary = self.primary
        truth_ratio = self.truth_ratio(self.spec.campaign.strategy)
        interim = self.profile.masses
        return {
            "case": self.spec.case,
            "seed": self.spec.seed,
            "strategy": self.spec.campaign.strategy.value,
            "truth": self.spec.truth,
            "truth_bin_value": None if self.truth_bin is None else float(self.profile.values[self.truth_bin]),
            "outcome": primary.campaign.outcome,
            "shortfall": max(0, self.spec.campaign.m - len(primary.campaign.ratings)),
            "n_effective": len(primary.campaign.ratings),
            "offers": primary.campaign.offers,
            "interim_at_truth": None if self.truth_bin is None else float(interim[self.truth_bin]),
            "posterior_ratio_at_truth": truth_ratio,
            "posterior_increment_at_truth": truth_ratio - 1.0,
            "posterior_ratio_at_false_peaks": {f"{c:g}": self.ratio_at(self.spec.campaign.strategy, i) for c, i in self.false_bins.items()},
            "strategies": self.strategy_rows(),
        }

    def write(self, out: str | Path) -> None:
        """Write the report directory (CSV tables plus ``summary.json``)."""
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "spec.json").write_text(json.dumps(self.spec.to_dict(), indent=2, sort_keys=True) + "\n")
        write_readings_csv(self.readings, out / "readings.csv")
        write_profile_json(self.profile, out / "profile.json")
        write_profile_csv(self.profile, out / "profile.csv")
        primary = self.primary
        primary.campaign.write_stats_csv(out / "cycle_stats.csv")
        primary.campaign.write_ratings_csv(out / "ratings.csv")
        primary.reshaped.write_csv(out / "reshaped.csv")
        primary.reshaped.write_json(out / "reshaped.json")
        primary.incentives.write_raters_csv(out / "incentives_raters.csv")
        primary.incentives.write_contributors_csv(out / "incentives_contributors.csv")
        for s, run in self.runs.items():
            run.reshaped.write_csv(out / f"reshaped_{s.value}.csv")
        (out / "summary.json").write_text(json.dumps(_jsonable(self.summary()), indent=2, sort_keys=True) + "\n")


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_jsonable(v) for v in obj]
    return obj


def _bin_containing(profile: Profile, value: float) -> Optional[int]:
    try:
        return profile.index_of(value)
    except KeyError:
        return None


def build_world(spec: ScenarioSpec, rng: np.random.Generator) -> tuple[Population, list[Reading], Profile]:
    population = generate_population(spec, rng)
    readings = generate_dataset(spec, rng, population.contributor_ids)
    profile = build_profile(readings, spec.bin_width)
    if spec.case == "B":
        truth_bin = _bin_containing(profile, spec.truth)
        hidden_mass = 0.0 if truth_bin is None else profile.masses[truth_bin]
        for peak in spec.peaks:
            i = _bin_containing(profile, peak.center)
            if i is None or not hidden_mass < profile.masses[i]:
                raise ValueError(
                    f"case B mislabeled: hidden-truth mass {hidden_mass:.4f} is not below the {peak.center:g} peak"
                )
    return population, readings, profile


def run_strategy(
    spec: ScenarioSpec,
    strategy: SamplingStrategy,
    population: Population,
    profile: Profile,
    seed_seq: np.random.SeedSequence,
) -> StrategyRun:
    config = replace(spec.campaign, strategy=strategy)
    registry = population.registry.copy()
    pop = replace(population, registry=registry)
    result = run_campaign(config, registry, profile, pop.responder(spec.behavior), rng=np.random.default_rng(seed_seq))
    scale = config.rating_scale
    ratings = result.ratings if result.success else []
    tally = tally_ratings(ratings, scale, len(profile))
    reshaped = reshape(profile, tally, len(ratings), config.eta)

    changes = update_reputations(registry, ratings, reshaped.interim, reshaped.posterior, scale.max_score) if ratings else []
    contributions = {c: (1.0, profile.bin_of(c)) for c in population.contributor_ids}
    payments = revise_payments(PAYMENT_FUNCTIONS[spec.payment], contributions, reshaped.interim, reshaped.posterior, spec.budget_mode)
    return StrategyRun(strategy, result, reshaped, IncentiveReport(changes, payments))


def run_scenario(spec: ScenarioSpec, strategies: Optional[list[SamplingStrategy | str]] = None) -> ScenarioReport:
    """Generate the world, profile it, and validate it under each strategy.

    The configured strategy is always included. A failed campaign leaves the
    posterior equal to the interim belief and is flagged in the summary.
    """
    world_seq, campaign_seq = np.random.SeedSequence(spec.seed).spawn(2)
    population, readings, profile = build_world(spec, np.random.default_rng(world_seq))

    chosen = [SamplingStrategy.parse(s) for s in (strategies if strategies is not None else list(SamplingStrategy))]
    if spec.campaign.strategy not in chosen:
        chosen.append(spec.campaign.strategy)
    runs = {s: run_strategy(spec, s, population, profile, campaign_seq) for s in chosen}

    truth_bin = _bin_containing(profile, spec.truth)
    false_bins = {}
    for peak in spec.peaks:
        i = _bin_containing(profile, peak.center)
        if i is not None and i != truth_bin:
            false_bins[peak.center] = i
    return ScenarioReport(spec, readings, profile, truth_bin, false_bins, runs)


def load_spec(path: str | Path) -> ScenarioSpec:
    return ScenarioSpec.from_dict(json.loads(Path(path).read_text()))
