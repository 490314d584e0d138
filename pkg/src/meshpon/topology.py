"""Network layout: cell placement, ODN splitter hierarchy, fiber distances.

Macro sites are nearest-site (Voronoi) anchors for small cells.  Each macro
hosts one level-1 splitter and one candidate MEC node; groups of level-1
splitters hang off a shared level-2 splitter whose reflective port enables
direct paths between PON branches.  The central office sits a configurable
fiber length above the level-2 stage.
"""

from __future__ import annotations

import io
import json
import math
import random
from dataclasses import dataclass, field, replace

from .traffic import FunctionalSplit

Point = tuple[float, float]


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class SplitterSpec:
    """Passive splitter, optionally with a co-located amplifier."""

    ports_in: int
    ports_out: int
    one_way_loss_db: float
    amplified: bool = False
    edfa_gain_db: float = 0.0

    def __post_init__(self):
        if self.one_way_loss_db <= 0:
            raise LayoutError("one_way_loss_db must be positive")
        if self.edfa_gain_db < 0:
            raise LayoutError("edfa_gain_db must be >= 0")
        if not self.amplified and self.edfa_gain_db != 0:
            raise LayoutError("unamplified splitter cannot have EDFA gain")

    @property
    def label(self) -> str:
        return f"{self.ports_in}x{self.ports_out}"


@dataclass
class MacroSite:
    """Macro-cell site: level-1 splitter plus a candidate MEC node."""

    id: str
    position: Point
    mec_capacity: int  # DU instances the MEC can host (1 per served RU)
    level1_splitter: SplitterSpec
    level2_id: str
    fiber_to_level2_km: float
    mec_drop_km: float = 0.5  # MEC transceiver to its level-1 splitter

    def __post_init__(self):
        if self.mec_capacity < 1:
            raise LayoutError(f"{self.id}: mec_capacity must be >= 1")
        if self.fiber_to_level2_km <= 0:
            raise LayoutError(f"{self.id}: fiber_to_level2_km must be positive")


@dataclass
class SmallCell:
    """Small-cell RU site served by an ONU on its macro's level-1 splitter."""

    id: str
    position: Point
    parent_macro: str
    fiber_to_level1_km: float
    split: FunctionalSplit

    def __post_init__(self):
        if self.fiber_to_level1_km <= 0:
            raise LayoutError(f"{self.id}: fiber_to_level1_km must be positive")


@dataclass
class NetworkLayout:
    """Immutable-after-generation description of the access network."""

    area_width_km: float
    area_height_km: float
    macro_sites: list[MacroSite]
    small_cells: list[SmallCell]
    co_fiber_km: float = 20.0  # level-2 splitter to central office
    fiber_routing_factor: float = 1.0
    level2_fanout: int = 8

    def __post_init__(self):
        self._macros = {m.id: m for m in self.macro_sites}
        self._cells = {c.id: c for c in self.small_cells}

    def macro(self, macro_id: str) -> MacroSite:
        return self._macros[macro_id]

    def cell(self, cell_id: str) -> SmallCell:
        return self._cells[cell_id]

    def cells_of(self, macro_id: str) -> list[SmallCell]:
        return [c for c in self.small_cells if c.parent_macro == macro_id]

    def validate(self) -> None:
        if self.area_width_km <= 0 or self.area_height_km <= 0:
            raise LayoutError("area must be positive")
        if self.fiber_routing_factor < 1.0:
            raise LayoutError("fiber_routing_factor must be >= 1")
        if not self.macro_sites:
            raise LayoutError("need at least one macro site")
        for m in self.macro_sites:
            if not self._inside(m.position):
                raise LayoutError(f"{m.id}: position outside declared area")
        for c in self.small_cells:
            if not self._inside(c.position):
                raise LayoutError(f"{c.id}: position outside declared area")
            if c.parent_macro not in self._macros:
                raise LayoutError(f"{c.id}: unknown parent macro {c.parent_macro}")

    def _inside(self, p: Point) -> bool:
        return 0 <= p[0] <= self.area_width_km and 0 <= p[1] <= self.area_height_km


@dataclass(frozen=True)
class LayoutDefaults:
    """Generator knobs shared by every synthetic layout."""

    mec_capacity: int = 16
    level1_splitter: SplitterSpec = SplitterSpec(4, 16, 14.03)
    mec_drop_km: float = 0.5
    co_fiber_km: float = 20.0
    fiber_routing_factor: float = 1.0
    level2_fanout: int = 4
    split71_fraction: float = 0.5
    min_fiber_km: float = 0.05  # floor so co-located nodes keep positive spans


def _distance(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def generate_layout(
    seed: int,
    n_macro: int,
    n_small: int,
    area: tuple[float, float] = (10.0, 10.0),
    defaults: LayoutDefaults = LayoutDefaults(),
) -> NetworkLayout:
    """Generate a random layout, deterministic for a fixed seed.

    Macro sites are uniform in the area; each small cell attaches to its
    nearest macro site (ties to the lowest macro index), which realizes the
    Voronoi partition without constructing polygons.  Fiber spans are
    Euclidean distances scaled by ``fiber_routing_factor``, floored at
    ``min_fiber_km``.  Level-2 splitters sit at the centroid of their macro
    group (groups of ``level2_fanout`` consecutive macro indices).
    """
    if n_macro < 1:
        raise LayoutError("n_macro must be >= 1")
    if n_small < n_macro:
        raise LayoutError("n_small must be >= n_macro")
    width, height = area
    if width <= 0 or height <= 0:
        raise LayoutError("area dimensions must be positive")

    rng = random.Random(seed)
    factor = defaults.fiber_routing_factor

    macro_pos = [(rng.uniform(0, width), rng.uniform(0, height)) for _ in range(n_macro)]
    cell_pos = [(rng.uniform(0, width), rng.uniform(0, height)) for _ in range(n_small)]
    splits = [
        FunctionalSplit.SPLIT_7_1
        if rng.random() < defaults.split71_fraction
        else FunctionalSplit.SPLIT_7_2
        for _ in range(n_small)
    ]

    groups: dict[int, list[int]] = {}
    for i in range(n_macro):
        groups.setdefault(i // defaults.level2_fanout, []).append(i)
    centroids = {
        g: (
            sum(macro_pos[i][0] for i in idx) / len(idx),
            sum(macro_pos[i][1] for i in idx) / len(idx),
        )
        for g, idx in groups.items()
    }

    macros = []
    for i, pos in enumerate(macro_pos):
        g = i // defaults.level2_fanout
        trunk = max(_distance(pos, centroids[g]) * factor, defaults.min_fiber_km)
        macros.append(
            MacroSite(
                id=f"M{i}",
                position=pos,
                mec_capacity=defaults.mec_capacity,
                level1_splitter=defaults.level1_splitter,
                level2_id=f"S2-{g}",
                fiber_to_level2_km=trunk,
                mec_drop_km=defaults.mec_drop_km,
            )
        )

    cells = []
    for j, pos in enumerate(cell_pos):
        nearest = min(range(n_macro), key=lambda i: (_distance(pos, macro_pos[i]), i))
        drop = max(_distance(pos, macro_pos[nearest]) * factor, defaults.min_fiber_km)
        cells.append(
            SmallCell(
                id=f"C{j}",
                position=pos,
                parent_macro=f"M{nearest}",
                fiber_to_level1_km=drop,
                split=splits[j],
            )
        )

    layout = NetworkLayout(
        area_width_km=width,
        area_height_km=height,
        macro_sites=macros,
        small_cells=cells,
        co_fiber_km=defaults.co_fiber_km,
        fiber_routing_factor=factor,
        level2_fanout=defaults.level2_fanout,
    )
    layout.validate()
    return layout


def east_west_distance_km(
    layout: NetworkLayout, ru: SmallCell | str, mec: MacroSite | str
) -> float:
    """One-way optical path length from an RU's ONU to a MEC's receiver.

    Same level-1 splitter: the two drop fibers.  Different macros under the
    same level-2 splitter: drop, trunk up, reflection, trunk down, drop.
    Macros under different level-2 splitters have no reflective path, which
    is reported as ``inf`` (total function; callers treat it as unreachable).
    """
    if isinstance(ru, str):
        ru = layout.cell(ru)
    if isinstance(mec, str):
        mec = layout.macro(mec)
    if ru.parent_macro == mec.id:
        return ru.fiber_to_level1_km + mec.mec_drop_km
    parent = layout.macro(ru.parent_macro)
    if parent.level2_id != mec.level2_id:
        return math.inf
    return (
        ru.fiber_to_level1_km
        + parent.fiber_to_level2_km
        + mec.fiber_to_level2_km
        + mec.mec_drop_km
    )


def co_distance_km(layout: NetworkLayout, ru: SmallCell | str) -> float:
    """One-way path length from an RU's ONU up to the central office."""
    if isinstance(ru, str):
        ru = layout.cell(ru)
    parent = layout.macro(ru.parent_macro)
    return ru.fiber_to_level1_km + parent.fiber_to_level2_km + layout.co_fiber_km


def layout_to_dict(layout: NetworkLayout) -> dict:
    return {
        "area_width_km": layout.area_width_km,
        "area_height_km": layout.area_height_km,
        "co_fiber_km": layout.co_fiber_km,
        "fiber_routing_factor": layout.fiber_routing_factor,
        "level2_fanout": layout.level2_fanout,
        "macro_sites": [
            {
                "id": m.id,
                "position": list(m.position),
                "mec_capacity": m.mec_capacity,
                "level1_splitter": {
                    "ports_in": m.level1_splitter.ports_in,
                    "ports_out": m.level1_splitter.ports_out,
                    "one_way_loss_db": m.level1_splitter.one_way_loss_db,
                    "amplified": m.level1_splitter.amplified,
                    "edfa_gain_db": m.level1_splitter.edfa_gain_db,
                },
                "level2_id": m.level2_id,
                "fiber_to_level2_km": m.fiber_to_level2_km,
                "mec_drop_km": m.mec_drop_km,
            }
            for m in layout.macro_sites
        ],
        "small_cells": [
            {
                "id": c.id,
                "position": list(c.position),
                "parent_macro": c.parent_macro,
                "fiber_to_level1_km": c.fiber_to_level1_km,
                "split": c.split.value,
            }
            for c in layout.small_cells
        ],
    }


def layout_from_dict(data: dict) -> NetworkLayout:
    macros = [
        MacroSite(
            id=m["id"],
            position=tuple(m["position"]),
            mec_capacity=m["mec_capacity"],
            level1_splitter=SplitterSpec(**m["level1_splitter"]),
            level2_id=m["level2_id"],
            fiber_to_level2_km=m["fiber_to_level2_km"],
            mec_drop_km=m.get("mec_drop_km", 0.5),
        )
        for m in data["macro_sites"]
    ]
    cells = [
        SmallCell(
            id=c["id"],
            position=tuple(c["position"]),
            parent_macro=c["parent_macro"],
            fiber_to_level1_km=c["fiber_to_level1_km"],
            split=FunctionalSplit(c["split"]),
        )
        for c in data["small_cells"]
    ]
    return NetworkLayout(
        area_width_km=data["area_width_km"],
        area_height_km=data["area_height_km"],
        macro_sites=macros,
        small_cells=cells,
        co_fiber_km=data.get("co_fiber_km", 20.0),
        fiber_routing_factor=data.get("fiber_routing_factor", 1.0),
        level2_fanout=data.get("level2_fanout", 8),
    )


def layout_to_json(layout: NetworkLayout) -> str:
    return json.dumps(layout_to_dict(layout), indent=2, sort_keys=True)


def layout_from_json(text: str) -> NetworkLayout:
    return layout_from_dict(json.loads(text))


def assignment_csv(layout: NetworkLayout) -> str:
    """Cell-to-macro assignment table for plotting the Voronoi partition."""
    buf = io.StringIO()
    buf.write("cell_id,macro_id,cell_x_km,cell_y_km,split,drop_km\n")
    for c in layout.small_cells:
        buf.write(
            f"{c.id},{c.parent_macro},{c.position[0]:.6f},{c.position[1]:.6f},"
            f"{c.split.value},{c.fiber_to_level1_km:.6f}\n"
        )
    return buf.getvalue()
