"""Fronthaul traffic: split-dependent bit rates and cell-load dynamics."""

from __future__ import annotations

import enum
import io
import random
from dataclasses import dataclass

import numpy as np


class FunctionalSplit(enum.Enum):
    """Low-layer RAN split at the RU; fixes the fronthaul rate range."""

    SPLIT_7_1 = "7.1"
    SPLIT_7_2 = "7.2"


class Interpolation(enum.Enum):
    LINEAR = "linear"


@dataclass(frozen=True)
class SplitRateModel:
    """Maps cell load to fronthaul bit rate for one functional split."""

    split: FunctionalSplit
    rate_min_bps: float
    rate_max_bps: float
    interpolation: Interpolation = Interpolation.LINEAR

    def __post_init__(self):
        if not 0.0 < self.rate_min_bps <= self.rate_max_bps:
            raise ValueError("need 0 < rate_min_bps <= rate_max_bps")


# Default rate endpoints for a 100 MHz cell with 4 antennas / 4 MIMO layers.
# Alternative radio configurations enter as new SplitRateModel constants.
SPLIT_7_1_RATES = SplitRateModel(FunctionalSplit.SPLIT_7_1, 1.378e9, 7.384e9)
SPLIT_7_2_RATES = SplitRateModel(FunctionalSplit.SPLIT_7_2, 273.98e6, 2.92e9)

RATE_MODELS = {
    FunctionalSplit.SPLIT_7_1: SPLIT_7_1_RATES,
    FunctionalSplit.SPLIT_7_2: SPLIT_7_2_RATES,
}


def fronthaul_rate(model: SplitRateModel, load: float) -> float:
    """Fronthaul bit rate (bps) carried by an RU at the given cell load.

    Linear in load between the model's published endpoints; monotone
    non-decreasing by construction.
    """
    if not 0.0 <= load <= 1.0:
        raise ValueError(f"load must be within [0, 1], got {load}")
    return model.rate_min_bps + load * (model.rate_max_bps - model.rate_min_bps)


@dataclass(frozen=True)
class TrafficProfile:
    """Per-RU offered load and, optionally, its connection-level dynamics.

    ``arrival_rate == 0`` means a static load.  When dynamic, connections
    arrive as a Poisson process and hold for exponential times; the load
    fraction is the active-connection count over ``max_connections``.
    """

    load: float
    arrival_rate: float = 0.0  # connections/s; 0 disables dynamics
    mean_holding_time_s: float = 0.0
    max_connections: int = 100
    rate_model: SplitRateModel | None = None  # override the per-split default

    def __post_init__(self):
        if not 0.0 <= self.load <= 1.0:
            raise ValueError(f"load must be within [0, 1], got {self.load}")
        if self.arrival_rate < 0:
            raise ValueError("arrival_rate must be >= 0")
        if self.arrival_rate > 0 and self.mean_holding_time_s <= 0:
            raise ValueError("dynamic mode needs mean_holding_time_s > 0")
        if self.max_connections < 1:
            raise ValueError("max_connections must be >= 1")

    def rate_for(self, split: FunctionalSplit) -> float:
        model = self.rate_model if self.rate_model is not None else RATE_MODELS[split]
        return fronthaul_rate(model, self.load)


@dataclass
class LoadTrace:
    """Step series of load fractions at connection arrival/departure events."""

    times_s: np.ndarray
    loads: np.ndarray

    def time_weighted_mean(self) -> float:
        spans = np.diff(self.times_s)
        if len(spans) == 0:
            return float(self.loads[0])
        return float(np.sum(self.loads[:-1] * spans) / np.sum(spans))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("time_s,load\n")
        for t, v in zip(self.times_s, self.loads):
            buf.write(f"{t:.6f},{v:.6f}\n")
        return buf.getvalue()


def evolve_load(profile: TrafficProfile, seed: int, horizon_s: float) -> LoadTrace:
    """Evolve a cell's load as a birth-death process over ``horizon_s``.

    Poisson connection arrivals at ``profile.arrival_rate``, exponential
    holding times, load normalized by ``max_connections`` and clamped to
    [0, 1].  Deterministic for a fixed seed.  The trace starts at the
    profile's load and ends with a closing sample at the horizon.
    """
    if horizon_s <= 0:
        raise ValueError("horizon_s must be positive")
    cap = profile.max_connections
    n = round(profile.load * cap)
    times = [0.0]
    loads = [min(1.0, n / cap)]
    if profile.arrival_rate > 0:
        rng = random.Random(seed)
        lam = profile.arrival_rate
        mu = 1.0 / profile.mean_holding_time_s
        t = 0.0
        while True:
            total = lam + n * mu
            t += rng.expovariate(total)
            if t >= horizon_s:
                break
            if rng.random() < lam / total:
                n += 1
            else:
                n -= 1
            times.append(t)
            loads.append(min(1.0, n / cap))
    times.append(horizon_s)
    loads.append(loads[-1])
    return LoadTrace(np.asarray(times), np.asarray(loads))
