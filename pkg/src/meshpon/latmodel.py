"""Closed-form mean upstream latency of a vPON slice.

The fast surrogate used inside the optimizer instead of simulation.  Each
wavelength is treated as an M/G/1 queue over the superposed packet streams
of its members, with deterministic service equal to one packet time on the
guard-discounted channel rate, plus a half-grant-cycle scheduling wait;
the slice mean is the packet-rate-weighted mean over wavelengths plus the
worst member's propagation delay.  Drivers: member count, per-RU load
(through the rates), and the split mix.
"""

from __future__ import annotations

from dataclasses import dataclass

from .despon import (
    LatencyEstimate,
    LatencySource,
    SimConfig,
    UnstableSliceError,
    VPonSlice,
    assign_wavelengths,
    build_slice,
)

MODEL_VERSION = "mg1-vacation/1"


@dataclass(frozen=True)
class AnalyticalParams:
    channel_rate_bps: float = 50e9
    grant_cycle_us: float = 62.5
    guard_time_us: float = 0.5
    packet_bits: int = 8000
    propagation_us_per_km: float = 5.0
    model_version: str = MODEL_VERSION

    @classmethod
    def from_sim_config(cls, config: SimConfig) -> "AnalyticalParams":
        """Parameters matching the simulator this model is validated against."""
        return cls(
            channel_rate_bps=config.channel_rate_bps,
            grant_cycle_us=config.grant_cycle_us,
            guard_time_us=config.guard_time_us,
            packet_bits=config.packet_bits,
            propagation_us_per_km=config.propagation_us_per_km,
        )

    def to_sim_config(self, **kwargs) -> SimConfig:
        return SimConfig(
            channel_rate_bps=self.channel_rate_bps,
            grant_cycle_us=self.grant_cycle_us,
            guard_time_us=self.guard_time_us,
            packet_bits=self.packet_bits,
            propagation_us_per_km=self.propagation_us_per_km,
            **kwargs,
        )


def wavelength_mean_us(
    n_members: int, aggregate_rate_bps: float, params: AnalyticalParams
) -> float:
    """Mean queueing + scheduling + serialization delay on one wavelength.

    Raises :class:`UnstableSliceError` at utilization >= 1; the waiting term
    diverges as utilization approaches 1 from below.
    """
    cycle = params.grant_cycle_us
    usable = cycle - n_members * params.guard_time_us
    if usable <= 0:
        raise UnstableSliceError(float("inf"))
    effective_rate = params.channel_rate_bps * usable / cycle
    service_us = params.packet_bits / effective_rate * 1e6
    lam_per_us = aggregate_rate_bps / params.packet_bits / 1e6
    rho = lam_per_us * service_us
    if rho >= 1.0:
        raise UnstableSliceError(rho)
    wait_us = lam_per_us * service_us**2 / (2.0 * (1.0 - rho))
    return cycle / 2.0 + wait_us + service_us


def analytic_latency_us(slice_: VPonSlice, params: AnalyticalParams) -> LatencyEstimate:
    """Mean upstream latency of a slice (source=analytical, mean only)."""
    groups = assign_wavelengths(slice_.members, len(slice_.wavelengths))
    weighted = 0.0
    total_lam = 0.0
    for group in groups:
        if not group:
            continue
        aggregate = sum(slice_.members[i].rate_bps for i in group)
        mean = wavelength_mean_us(len(group), aggregate, params)
        lam = aggregate / params.packet_bits
        weighted += lam * mean
        total_lam += lam
    propagation = max(m.distance_km for m in slice_.members) * params.propagation_us_per_km
    return LatencyEstimate(
        mean_us=propagation + weighted / total_lam,
        p99_us=None,
        frames_measured=0,
        source=LatencySource.ANALYTICAL,
    )


def max_members_feasible(
    n71: int,
    n72: int,
    load: float,
    threshold_us: float,
    params: AnalyticalParams,
    distance_km: float = 1.0,
    n_wavelengths: int = 1,
) -> bool:
    """Whether a slice of ``n71`` + ``n72`` RUs at this load meets the threshold.

    The empty mix is feasible by definition; unstable mixes are infeasible
    rather than errors.
    """
    if threshold_us <= 0:
        raise ValueError("threshold_us must be positive")
    if n71 == 0 and n72 == 0:
        return True
    slice_ = build_slice(
        n71, n72, load, params.to_sim_config(), distance_km, n_wavelengths
    )
    try:
        estimate = analytic_latency_us(slice_, params)
    except UnstableSliceError:
        return False
    return estimate.mean_us <= threshold_us


@dataclass(frozen=True)
class RegionPoint:
    load: float
    n71: int
    n72: int
    latency_us: float | None  # None when the mix is unstable
    feasible: bool
    boundary: bool


def feasibility_region(
    loads,
    threshold_us: float,
    params: AnalyticalParams,
    max_n71: int = 20,
    max_n72: int = 60,
    distance_km: float = 1.0,
    n_wavelengths: int = 1,
) -> list[RegionPoint]:
    """Sweep the (n71, n72) grid per load; flag feasible and boundary points.

    A point is on the boundary when it is feasible but adding one more RU of
    either split is not.
    """
    points = []
    for load in loads:
        feasible = {}
        latency = {}
        for n71 in range(max_n71 + 1):
            for n72 in range(max_n72 + 1):
                if n71 == 0 and n72 == 0:
                    feasible[(n71, n72)] = True
                    latency[(n71, n72)] = None
                    continue
                slice_ = build_slice(
                    n71, n72, load, params.to_sim_config(), distance_km, n_wavelengths
                )
                try:
                    est = analytic_latency_us(slice_, params)
                    latency[(n71, n72)] = est.mean_us
                    feasible[(n71, n72)] = est.mean_us <= threshold_us
                except UnstableSliceError:
                    latency[(n71, n72)] = None
                    feasible[(n71, n72)] = False
        for n71 in range(max_n71 + 1):
            for n72 in range(max_n72 + 1):
                ok = feasible[(n71, n72)]
                up = feasible.get((n71 + 1, n72), False)
                right = feasible.get((n71, n72 + 1), False)
                points.append(
                    RegionPoint(
                        load=load,
                        n71=n71,
                        n72=n72,
                        latency_us=latency[(n71, n72)],
                        feasible=ok,
                        boundary=ok and not (up and right),
                    )
                )
    return points
