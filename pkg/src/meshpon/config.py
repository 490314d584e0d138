"""Experiment configuration: one JSON document with defaults for every field.

The same model is the request body of the service endpoints and the file
format of the CLI's ``--config``; CLI flags override file values.
"""

from __future__ import annotations

import json
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import despon, latmodel, maio, powerbudget, topology, traffic


class ConfigError(ValueError):
    """Unreadable or invalid experiment configuration."""


class LayoutSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    file: str | None = None  # load a layout JSON instead of generating
    n_macro: int = 7
    n_small: int = 60
    area_width_km: float = 10.0
    area_height_km: float = 10.0
    mec_capacity: int = 16
    splitter: str = "4x16"  # level-1 splitter size label
    split71_fraction: float = 0.5
    fiber_routing_factor: float = 1.0
    level2_fanout: int = 4
    co_fiber_km: float = 20.0
    mec_drop_km: float = 0.5
    min_fiber_km: float = 0.05


class TrafficSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    load: float = 0.5
    arrival_rate: float = 0.0
    mean_holding_time_s: float = 0.0
    max_connections: int = 100


class SimSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    channel_rate_bps: float = 50e9
    grant_cycle_us: float = 62.5
    guard_time_us: float = 0.5
    packet_bits: int = 8000
    propagation_us_per_km: float = 5.0
    warmup_frames: int = 2000
    measured_frames: int = 20000


class BudgetSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    drop_km: float = 0.5
    trunk_km: float = 10.0
    level1_edfa_gain_db: float = powerbudget.LEVEL1_EDFA_GAIN_DB
    fbg_loss_db: float = 2.0
    connector_loss_db: float = 1.0
    fiber_loss_db_per_km: float = 0.3
    splitter_loss_db: dict[str, float] = Field(
        default_factory=lambda: dict(powerbudget.DEFAULT_SPLITTER_LOSS_DB)
    )
    # [total_split, stage1_label, stage2_label] rows to evaluate
    configurations: list[tuple[int, str, str]] = Field(
        default_factory=lambda: [list(c) for c in powerbudget.DEFAULT_CONFIGURATIONS]
    )


class SliceSection(BaseModel):
    """Synthetic slice evaluated by the ``simulate`` command."""

    model_config = ConfigDict(extra="forbid")

    n71: int = 0
    n72: int = 16
    load: float | None = None  # None: use traffic.load
    distance_km: float = 1.0
    wavelengths: int | None = None  # None: auto-size to the target utilization
    target_utilization: float = 0.75
    trace: bool = False  # also emit the per-frame trace CSV


class RegionSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    loads: list[float] = Field(default_factory=lambda: [0.5, 0.7, 0.9])
    threshold_us: float = 100.0
    max_n71: int = 20
    max_n72: int = 60
    distance_km: float = 1.0
    wavelengths: int = 1
    crosscheck_boundary: bool = False  # simulate boundary points as well


class MaioSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    threshold_us: float = 100.0
    wavelengths_per_tree: int = 4
    slice_wavelengths: int = 1
    max_iterations: int = 100
    oracle: str = "analytical"  # "analytical" | "simulated"
    loads: list[float] | None = None  # sweep; None: [traffic.load]
    iterations_sweep: list[int] | None = None  # sweep; None: [max_iterations]


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = 1
    out_dir: str = "out"
    layout: LayoutSection = Field(default_factory=LayoutSection)
    traffic: TrafficSection = Field(default_factory=TrafficSection)
    sim: SimSection = Field(default_factory=SimSection)
    budget: BudgetSection = Field(default_factory=BudgetSection)
    vpon_slice: SliceSection = Field(default_factory=SliceSection)
    region: RegionSection = Field(default_factory=RegionSection)
    maio: MaioSection = Field(default_factory=MaioSection)

    def resolved(self) -> dict:
        """JSON-ready dict of every resolved field, embedded in artifacts."""
        return self.model_dump(mode="json")


def _format_validation_error(err: ValidationError) -> str:
    lines = []
    for item in err.errors():
        loc = ".".join(str(p) for p in item["loc"]) or "<root>"
        lines.append(f"  {loc}: {item['msg']}")
    return "invalid configuration:\n" + "\n".join(lines)


def load_config(path: str | Path | None, overrides: dict | None = None) -> ExperimentConfig:
    """Build a config from an optional JSON file plus flag overrides."""
    data: dict = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            data = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"config file {p} is not valid JSON: line {exc.lineno} column {exc.colno}: {exc.msg}"
            ) from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config file {p} must contain a JSON object")
    for dotted, value in (overrides or {}).items():
        node = data
        parts = dotted.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_validation_error(exc)) from exc


def sim_config_from(cfg: ExperimentConfig) -> despon.SimConfig:
    return despon.SimConfig(
        channel_rate_bps=cfg.sim.channel_rate_bps,
        grant_cycle_us=cfg.sim.grant_cycle_us,
        guard_time_us=cfg.sim.guard_time_us,
        packet_bits=cfg.sim.packet_bits,
        propagation_us_per_km=cfg.sim.propagation_us_per_km,
        warmup_frames=cfg.sim.warmup_frames,
        measured_frames=cfg.sim.measured_frames,
        seed=cfg.seed,
    )


def budget_params_from(cfg: ExperimentConfig) -> powerbudget.BudgetParams:
    return powerbudget.BudgetParams(
        fbg_loss_db=cfg.budget.fbg_loss_db,
        connector_loss_db=cfg.budget.connector_loss_db,
        fiber_loss_db_per_km=cfg.budget.fiber_loss_db_per_km,
        splitter_loss_db=dict(cfg.budget.splitter_loss_db),
    )


def traffic_profile_from(cfg: ExperimentConfig, load: float | None = None) -> traffic.TrafficProfile:
    return traffic.TrafficProfile(
        load=cfg.traffic.load if load is None else load,
        arrival_rate=cfg.traffic.arrival_rate,
        mean_holding_time_s=cfg.traffic.mean_holding_time_s,
        max_connections=cfg.traffic.max_connections,
    )


def layout_from(cfg: ExperimentConfig) -> topology.NetworkLayout:
    if cfg.layout.file is not None:
        p = Path(cfg.layout.file)
        if not p.exists():
            raise ConfigError(f"layout file not found: {p}")
        return topology.layout_from_json(p.read_text())
    params = budget_params_from(cfg)
    try:
        splitter = params.splitter(cfg.layout.splitter)
    except KeyError as exc:
        raise ConfigError(f"layout.splitter: unknown splitter label {exc}") from exc
    defaults = topology.LayoutDefaults(
        mec_capacity=cfg.layout.mec_capacity,
        level1_splitter=splitter,
        mec_drop_km=cfg.layout.mec_drop_km,
        co_fiber_km=cfg.layout.co_fiber_km,
        fiber_routing_factor=cfg.layout.fiber_routing_factor,
        level2_fanout=cfg.layout.level2_fanout,
        split71_fraction=cfg.layout.split71_fraction,
        min_fiber_km=cfg.layout.min_fiber_km,
    )
    try:
        return topology.generate_layout(
            seed=cfg.seed,
            n_macro=cfg.layout.n_macro,
            n_small=cfg.layout.n_small,
            area=(cfg.layout.area_width_km, cfg.layout.area_height_km),
            defaults=defaults,
        )
    except topology.LayoutError as exc:
        raise ConfigError(f"layout: {exc}") from exc


def maio_problem_from(
    cfg: ExperimentConfig,
    layout: topology.NetworkLayout,
    load: float | None = None,
    max_iterations: int | None = None,
) -> maio.MaioProblem:
    try:
        oracle = maio.OracleKind(cfg.maio.oracle)
    except ValueError as exc:
        raise ConfigError(f"maio.oracle: must be one of analytical, simulated") from exc
    return maio.MaioProblem(
        layout=layout,
        traffic=traffic_profile_from(cfg, load),
        threshold_us=cfg.maio.threshold_us,
        wavelengths_per_tree=cfg.maio.wavelengths_per_tree,
        slice_wavelengths=cfg.maio.slice_wavelengths,
        max_iterations=cfg.maio.max_iterations if max_iterations is None else max_iterations,
        oracle=oracle,
        sim_config=sim_config_from(cfg),
    )


def analytical_params_from(cfg: ExperimentConfig) -> latmodel.AnalyticalParams:
    return latmodel.AnalyticalParams.from_sim_config(sim_config_from(cfg))
