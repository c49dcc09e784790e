"""Worker population, reputations, privacy elasticities and rater selection."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Iterable

import numpy as np


@dataclass(frozen=True)
class RegistryParams:
    epsilon: float = 0.1
    delta: float = 0.2
    lambda_max: float = 1.6
    lambda_init: float = 1.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.lambda_max > self.lambda_init > 0:
            raise ValueError("need lambda_max > lambda_init > 0")


@dataclass(frozen=True)
class Worker:
    id: str
    reputation: float = 0.0
    elasticity: float = 1.0
    last_offer_time: float = 0.0
    is_contributor: bool = False
    signup_time: float = 0.0


class PrivacyAction(str, enum.Enum):
    MORE = "more"
    LESS = "less"
    STOP = "stop"


def selection_weight(worker: Worker, t: float, params: RegistryParams = RegistryParams()) -> float:
    """Unnormalised chance of pushing an offer to ``worker`` at time ``t``.

    ``1 - exp(-lambda * (t - t_last) * (R + eps))``: grows with the time since
    the worker's last offer, with reputation, and with their elasticity.
    """
    elapsed = t - worker.last_offer_time
    if elapsed < 0:
        raise ValueError(f"clock regression: t={t} precedes last offer {worker.last_offer_time} of {worker.id}")
    return -math.expm1(-worker.elasticity * elapsed * (worker.reputation + params.epsilon))


def updated_elasticity(elasticity: float, action: PrivacyAction | str, params: RegistryParams) -> float:
    action = PrivacyAction(action)
    if action is PrivacyAction.MORE:
        return min(elasticity + params.delta, params.lambda_max)
    if action is PrivacyAction.LESS:
        return max(elasticity - params.delta, params.epsilon)
    return 0.0


def apply_privacy_action(worker: Worker, action: PrivacyAction | str, params: RegistryParams = RegistryParams()) -> Worker:
    """Return ``worker`` with elasticity adjusted by a More/Less/Stop request."""
    return replace(worker, elasticity=updated_elasticity(worker.elasticity, action, params))


class WorkerRegistry:
    """Column store of the worker population ``U``.

    All mutation (offer timestamps, elasticities, reputations) goes through
    this object; it is not thread-safe and expects a single owner.
    """

    def __init__(self, workers: Iterable[Worker], params: RegistryParams = RegistryParams()):
        workers = list(workers)
        self.params = params
        self.ids = [w.id for w in workers]
        self._index = {wid: i for i, wid in enumerate(self.ids)}
        if len(self._index) != len(self.ids):
            raise ValueError("duplicate worker ids")
        self.reputation = np.array([w.reputation for w in workers], dtype=float)
        self.elasticity = np.array([w.elasticity for w in workers], dtype=float)
        self.last_offer = np.array([w.last_offer_time for w in workers], dtype=float)
        self.signup = np.array([w.signup_time for w in workers], dtype=float)
        self.is_contributor = np.array([w.is_contributor for w in workers], dtype=bool)
        if np.any(self.reputation < 0):
            raise ValueError("reputations must be nonnegative")
        if np.any((self.elasticity < 0) | (self.elasticity > params.lambda_max)):
            raise ValueError(f"elasticities must lie in [0, {params.lambda_max}]")

    @classmethod
    def from_arrays(
        cls,
        ids: list[str],
        signup: np.ndarray,
        params: RegistryParams = RegistryParams(),
        is_contributor: np.ndarray | None = None,
    ) -> WorkerRegistry:
        """Fresh population: zero reputation, initial elasticity, last offer at signup."""
        n = len(ids)
        reg = cls((), params)
        reg.ids = list(ids)
        reg._index = {wid: i for i, wid in enumerate(reg.ids)}
        if len(reg._index) != n:
            raise ValueError("duplicate worker ids")
        reg.reputation = np.zeros(n)
        reg.elasticity = np.full(n, params.lambda_init)
        reg.signup = np.asarray(signup, dtype=float).copy()
        reg.last_offer = reg.signup.copy()
        reg.is_contributor = np.zeros(n, dtype=bool) if is_contributor is None else np.asarray(is_contributor, dtype=bool).copy()
        return reg

    def __len__(self) -> int:
        return len(self.ids)

    def __getitem__(self, i: int) -> Worker:
        return Worker(
            id=self.ids[i],
            reputation=float(self.reputation[i]),
            elasticity=float(self.elasticity[i]),
            last_offer_time=float(self.last_offer[i]),
            is_contributor=bool(self.is_contributor[i]),
            signup_time=float(self.signup[i]),
        )

    def index(self, worker_id: str) -> int:
        return self._index[worker_id]

    def copy(self) -> WorkerRegistry:
        other = object.__new__(WorkerRegistry)
        other.params = self.params
        other.ids = self.ids
        other._index = self._index
        for name in ("reputation", "elasticity", "last_offer", "signup", "is_contributor"):
            setattr(other, name, getattr(self, name).copy())
        return other

    def mark_contributors(self, worker_ids: Iterable[str]) -> None:
        for wid in worker_ids:
            self.is_contributor[self._index[wid]] = True

    def candidate_pool(self) -> np.ndarray:
        """Indices of non-contributors who have not opted out."""
        return np.flatnonzero(~self.is_contributor & (self.elasticity > 0))

    def selection_weights(self, pool: np.ndarray, t: float) -> np.ndarray:
        elapsed = t - self.last_offer[pool]
        if elapsed.size and elapsed.min() < 0:
            bad = pool[int(np.argmin(elapsed))]
            raise ValueError(f"clock regression: t={t} precedes last offer {self.last_offer[bad]} of {self.ids[bad]}")
        rate = self.elasticity[pool] * (self.reputation[pool] + self.params.epsilon)
        return -np.expm1(-rate * elapsed)

    def select_raters(self, pool: np.ndarray, t: float, count: int, rng: np.random.Generator) -> np.ndarray:
        """Pick up to ``count`` distinct raters from ``pool`` and stamp their offer time.

        Equivalent to drawing one worker at a time with probability
        proportional to :func:`selection_weight`, removing them, and
        renormalising: each candidate gets key ``E/w`` with ``E ~ Exp(1)``
        and the smallest keys win (the first winner is the first draw).
        Zero-weight workers are never picked.
        """
        pool = np.asarray(pool, dtype=np.int64)
        if count <= 0 or pool.size == 0:
            return np.empty(0, dtype=np.int64)
        w = self.selection_weights(pool, t)
        keys = rng.exponential(size=pool.size)
        live = w > 0
        keys[live] /= w[live]
        keys[~live] = np.inf
        k = min(count, int(live.sum()))
        if k == 0:
            return np.empty(0, dtype=np.int64)
        if k < pool.size:
            part = np.argpartition(keys, k - 1)[:k]
        else:
            part = np.arange(pool.size)
        order = part[np.lexsort((pool[part], keys[part]))]
        chosen = pool[order]
        self.last_offer[chosen] = t
        return chosen

    def apply_privacy_action(self, i: int, action: PrivacyAction | str) -> None:
        self.elasticity[i] = updated_elasticity(float(self.elasticity[i]), action, self.params)

    def workers(self) -> list[Worker]:
        return [self[i] for i in range(len(self))]

    def to_json(self) -> str:
        return json.dumps([asdict(w) for w in self.workers()], indent=1)

    @classmethod
    def from_json(cls, text: str, params: RegistryParams = RegistryParams()) -> WorkerRegistry:
        return cls((Worker(**rec) for rec in json.loads(text)), params)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path: str | Path, params: RegistryParams = RegistryParams()) -> WorkerRegistry:
        return cls.from_json(Path(path).read_text(), params)

