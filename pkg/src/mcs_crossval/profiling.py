"""Histogram profiling of crowd-sensed readings.

A profile summarises a dataset as one representative value per non-empty
histogram bin (the bin median) together with the bin's share of the data,
which serves as the interim belief that the representative is the truth.
"""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class Reading:
    """One sensed data point and the worker who submitted it."""

    value: float
    contributor_id: str = ""

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"non-finite reading {self.value!r} from contributor {self.contributor_id!r}")


@dataclass(frozen=True)
class Bin:
    value: float  # representative (median)
    mass: float  # interim belief p_i
    volume: int  # kappa_i


@dataclass(frozen=True)
class Profile:
    """Representative values and interim beliefs of a crowd-sensed dataset.

    ``contributor_bins`` maps each contributor to the bin indices of their
    readings; payment revision needs it to look up a contributor's belief.
    """

    bin_width: float
    bins: tuple[Bin, ...]
    anchor: float = 0.0
    contributor_bins: dict[str, tuple[int, ...]] = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return len(self.bins)

    @property
    def values(self) -> np.ndarray:
        return np.array([b.value for b in self.bins], dtype=float)

    @property
    def masses(self) -> np.ndarray:
        return np.array([b.mass for b in self.bins], dtype=float)

    @property
    def volumes(self) -> np.ndarray:
        return np.array([b.volume for b in self.bins], dtype=np.int64)

    def index_of(self, value: float) -> int:
        """Index of the bin whose half-open interval contains ``value``."""
        k = self._grid_index(value)
        for i, b in enumerate(self.bins):
            if self._grid_index(b.value) == k:
                return i
        raise KeyError(f"no profiled bin contains {value}")

    def _grid_index(self, value: float) -> int:
        return math.floor((value - self.anchor) / self.bin_width)

    def bin_lower(self, i: int) -> float:
        return self.anchor + self._grid_index(self.bins[i].value) * self.bin_width

    def bin_of(self, contributor_id: str) -> int:
        """The single bin a contributor's data fell into."""
        try:
            idx = self.contributor_bins[contributor_id]
        except KeyError:
            raise KeyError(f"unknown contributor {contributor_id!r}") from None
        if len(set(idx)) != 1:
            raise ValueError(f"contributor {contributor_id!r} has readings in several bins: {sorted(set(idx))}")
        return idx[0]

    def to_dict(self) -> dict:
        return {
            "bin_width": self.bin_width,
            "anchor": self.anchor,
            "bins": [{"v": b.value, "p": b.mass, "kappa": b.volume} for b in self.bins],
        }

    @classmethod
    def from_dict(cls, data: dict) -> Profile:
        bins = data["bins"]
        total = sum(int(b["kappa"]) for b in bins)
        return cls(
            bin_width=float(data["bin_width"]),
            bins=tuple(Bin(float(b["v"]), int(b["kappa"]) / total, int(b["kappa"])) for b in bins),
            anchor=float(data.get("anchor", bins[0]["v"] if bins else 0.0)),
        )


def build_profile(readings: Sequence[Reading], bin_width: float, anchor: float | None = None) -> Profile:
    """Bin ``readings`` at ``bin_width`` and return the median/mass profile.

    Bins are half-open ``[anchor + k*w, anchor + (k+1)*w)``; ``anchor``
    defaults to the smallest reading. Empty bins are dropped. For an even
    number of readings in a bin the lower-middle one is the representative,
    so every representative is an observed value.
    """
    if not readings:
        raise ValueError("no data to profile")
    if not (bin_width > 0 and math.isfinite(bin_width)):
        raise ValueError(f"bin width must be positive, got {bin_width!r}")

    lo = min(r.value for r in readings) if anchor is None else float(anchor)
    groups: dict[int, list[float]] = defaultdict(list)
    owners: dict[str, list[int]] = defaultdict(list)
    for r in readings:
        k = math.floor((r.value - lo) / bin_width)
        if k < 0:
            raise ValueError(f"reading {r.value} lies below the anchor {lo}")
        groups[k].append(r.value)
        owners[r.contributor_id].append(k)

    keys = sorted(groups)
    position = {k: i for i, k in enumerate(keys)}
    total = len(readings)
    bins = []
    for k in keys:
        vals = sorted(groups[k])
        bins.append(Bin(value=vals[(len(vals) - 1) // 2], mass=len(vals) / total, volume=len(vals)))
    contributor_bins = {c: tuple(position[k] for k in ks) for c, ks in owners.items()}
    return Profile(bin_width=float(bin_width), bins=tuple(bins), anchor=lo, contributor_bins=contributor_bins)


def read_readings_csv(path: str | Path) -> list[Reading]:
    """Load ``contributor_id,value`` rows."""
    readings = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"contributor_id", "value"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(sorted(missing))}")
        for line, row in enumerate(reader, start=2):
            try:
                value = float(row["value"])
            except ValueError:
                raise ValueError(f"{path}:{line}: bad value {row['value']!r}") from None
            if not math.isfinite(value):
                raise ValueError(f"{path}:{line}: non-finite value {row['value']!r} (contributor {row['contributor_id']!r})")
            readings.append(Reading(value, row["contributor_id"]))
    return readings


def write_readings_csv(readings: Iterable[Reading], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["contributor_id", "value"])
        for r in readings:
            w.writerow([r.contributor_id, repr(r.value)])


def write_profile_json(profile: Profile, path: str | Path) -> None:
    Path(path).write_text(json.dumps(profile.to_dict(), indent=2) + "\n")


def read_profile_json(path: str | Path) -> Profile:
    return Profile.from_dict(json.loads(Path(path).read_text()))


def write_profile_csv(profile: Profile, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["v", "p", "kappa"])
        for b in profile.bins:
            w.writerow([repr(b.value), repr(b.mass), b.volume])
