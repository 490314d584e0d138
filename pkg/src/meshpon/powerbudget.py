"""Optical loss of reflective EAST-WEST paths and ITU budget classification.

A reflective path traverses its splitter stage(s) twice (outbound and back
after the FBG reflection), so splitter losses count double while the FBG and
connector losses are lumped once per end-to-end path.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping

from .topology import SplitterSpec


class BudgetClass(enum.Enum):
    N1 = "N1"
    N2 = "N2"
    E1 = "E1"
    E2 = "E2"


class ReflectionPoint(enum.Enum):
    LEVEL1 = "level1"
    LEVEL2 = "level2"


# Measured one-way insertion losses per splitter size.
DEFAULT_SPLITTER_LOSS_DB = {
    "4x4": 7.3,
    "4x8": 10.75,
    "4x16": 14.03,
    "4x32": 17.33,
}

DEFAULT_CLASS_THRESHOLDS_DB = {
    BudgetClass.N1: 29.0,
    BudgetClass.N2: 31.0,
    BudgetClass.E1: 33.0,
    BudgetClass.E2: 35.0,
}

# Flat gain assumed for an amplified level-1 splitter; reverse fit from the
# amplified first-stage loss figures (24.8->9.8, 31.36->16.36, 37.96->22.96).
LEVEL1_EDFA_GAIN_DB = 15.0


@dataclass(frozen=True)
class BudgetParams:
    fbg_loss_db: float = 2.0
    connector_loss_db: float = 1.0  # one lumped value per end-to-end path
    fiber_loss_db_per_km: float = 0.3  # includes splice loss
    splitter_loss_db: Mapping[str, float] = field(
        default_factory=lambda: dict(DEFAULT_SPLITTER_LOSS_DB)
    )
    class_thresholds_db: Mapping[BudgetClass, float] = field(
        default_factory=lambda: dict(DEFAULT_CLASS_THRESHOLDS_DB)
    )

    def __post_init__(self):
        if min(self.splitter_loss_db.values(), default=1.0) < 0:
            raise ValueError("splitter losses must be >= 0")
        thresholds = [self.class_thresholds_db[c] for c in BudgetClass]
        if sorted(thresholds) != thresholds or len(set(thresholds)) != len(thresholds):
            raise ValueError("class thresholds must be strictly increasing N1 < N2 < E1 < E2")

    def splitter(self, label: str) -> SplitterSpec:
        """SplitterSpec for a configured size label like ``4x16``."""
        ports_in, ports_out = (int(p) for p in label.split("x"))
        return SplitterSpec(ports_in, ports_out, self.splitter_loss_db[label])


@dataclass(frozen=True)
class PathSpec:
    """One reflective path between two endpoints of the ODN."""

    stage1: SplitterSpec
    stage2: SplitterSpec | None = None
    drop_km: float = 0.5  # ONU (or MEC receiver) to its level-1 splitter
    trunk_km: float = 10.0  # level-1 to level-2 splitter
    reflect_at: ReflectionPoint = ReflectionPoint.LEVEL1
    edfa_gain_db: float = 0.0  # applied once at the reflection splitter

    def __post_init__(self):
        if self.reflect_at is ReflectionPoint.LEVEL2 and self.stage2 is None:
            raise ValueError("reflection at level 2 requires a stage-2 splitter")


def east_west_loss_db(path: PathSpec, params: BudgetParams = BudgetParams()) -> float:
    """Total optical loss of a reflective path, in dB (gain may drive it negative)."""
    fixed = params.fbg_loss_db + params.connector_loss_db
    if path.reflect_at is ReflectionPoint.LEVEL1:
        fiber = 2 * path.drop_km * params.fiber_loss_db_per_km
        return 2 * path.stage1.one_way_loss_db + fixed + fiber - path.edfa_gain_db
    fiber = (2 * path.trunk_km + 2 * path.drop_km) * params.fiber_loss_db_per_km
    return (
        2 * path.stage1.one_way_loss_db
        + 2 * path.stage2.one_way_loss_db
        + fixed
        + fiber
        - path.edfa_gain_db
    )


def classify_budget(
    loss_db: float, params: BudgetParams = BudgetParams()
) -> BudgetClass | None:
    """Smallest budget class covering the loss; None when beyond E2 (infeasible)."""
    if not math.isfinite(loss_db):
        raise ValueError("loss_db must be finite")
    for cls in BudgetClass:
        if loss_db <= params.class_thresholds_db[cls]:
            return cls
    return None


def required_edfa_gain_db(
    path: PathSpec,
    params: BudgetParams = BudgetParams(),
    target_class: BudgetClass = BudgetClass.N1,
) -> int:
    """Minimal whole-dB gain bringing the path within the target class."""
    bare = east_west_loss_db(
        PathSpec(
            stage1=path.stage1,
            stage2=path.stage2,
            drop_km=path.drop_km,
            trunk_km=path.trunk_km,
            reflect_at=path.reflect_at,
            edfa_gain_db=0.0,
        ),
        params,
    )
    excess = bare - params.class_thresholds_db[target_class]
    if excess <= 0:
        return 0
    return math.ceil(round(excess, 6))


@dataclass(frozen=True)
class LossTableRow:
    """One splitter configuration evaluated over all four reflective variants."""

    total_split: int
    stage1: str
    stage2: str
    level1_loss_db: float
    level1_class: BudgetClass | None
    level1_edfa_loss_db: float
    level1_edfa_class: BudgetClass | None
    level2_loss_db: float
    level2_class: BudgetClass | None
    level2_edfa_gain_db: int
    level2_edfa_loss_db: float
    level2_edfa_class: BudgetClass | None


DEFAULT_CONFIGURATIONS = (
    (32, "4x8", "4x4"),
    (64, "4x16", "4x4"),
    (128, "4x32", "4x4"),
    (128, "4x16", "4x8"),
)


def loss_table(
    params: BudgetParams = BudgetParams(),
    configurations=DEFAULT_CONFIGURATIONS,
    drop_km: float = 0.5,
    trunk_km: float = 10.0,
    level1_edfa_gain_db: float = LEVEL1_EDFA_GAIN_DB,
    target_class: BudgetClass = BudgetClass.N1,
) -> list[LossTableRow]:
    """Loss of every configured splitter configuration on both reflection points.

    Level-2 amplified losses use the minimal whole-dB gain that reaches
    ``target_class``; level-1 amplified losses use the flat default gain.
    """
    rows = []
    for total, s1_label, s2_label in configurations:
        s1 = params.splitter(s1_label)
        s2 = params.splitter(s2_label)
        l1 = PathSpec(stage1=s1, drop_km=drop_km, trunk_km=trunk_km)
        l2 = PathSpec(
            stage1=s1,
            stage2=s2,
            drop_km=drop_km,
            trunk_km=trunk_km,
            reflect_at=ReflectionPoint.LEVEL2,
        )
        l1_loss = east_west_loss_db(l1, params)
        l2_loss = east_west_loss_db(l2, params)
        gain = required_edfa_gain_db(l2, params, target_class)
        l1_amp = l1_loss - level1_edfa_gain_db
        l2_amp = l2_loss - gain
        rows.append(
            LossTableRow(
                total_split=total,
                stage1=s1_label,
                stage2=s2_label,
                level1_loss_db=l1_loss,
                level1_class=classify_budget(l1_loss, params),
                level1_edfa_loss_db=l1_amp,
                level1_edfa_class=classify_budget(l1_amp, params),
                level2_loss_db=l2_loss,
                level2_class=classify_budget(l2_loss, params),
                level2_edfa_gain_db=gain,
                level2_edfa_loss_db=l2_amp,
                level2_edfa_class=classify_budget(l2_amp, params),
            )
        )
    return rows
