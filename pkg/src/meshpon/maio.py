"""Minimum-MEC vPON slice optimization with iterative latency cuts.

The latency constraint is nonlinear in the slice composition, so it is not
placed in the integer program directly.  Instead the loop solves the linear
enable/assignment program, evaluates the latency oracle on every induced
slice, and adds one no-good cut per violating slice: the cut forbids that
exact member set on that OLT site, and because slice latency is monotone in
membership it implicitly forbids all supersets as well.  When an iteration
budget is exhausted at a given MEC count the count is forced one higher and
the loop continues with all cuts retained.
"""

from __future__ import annotations

import enum
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable

from .despon import (
    LatencyEstimate,
    SimConfig,
    SliceMember,
    UnstableSliceError,
    VPonSlice,
    simulate_slice,
)
from .latmodel import AnalyticalParams, analytic_latency_us
from .topology import NetworkLayout, co_distance_km, east_west_distance_km
from .traffic import TrafficProfile

CO_SITE = "CO"

LatencyOracle = Callable[[VPonSlice], LatencyEstimate]


class OracleKind(enum.Enum):
    ANALYTICAL = "analytical"
    SIMULATED = "simulated"


class MaioStatus(enum.Enum):
    OPTIMAL = "optimal"
    FEASIBLE_AT_BOUND = "feasible_at_bound"  # found after forcing extra MECs
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class MaioProblem:
    layout: NetworkLayout
    traffic: TrafficProfile
    threshold_us: float = 100.0
    wavelengths_per_tree: int = 4  # shared ODN spectrum per level-2 tree
    slice_wavelengths: int = 1  # channels per vPON slice
    max_iterations: int = 100  # per enabled-MEC-count level
    oracle: OracleKind = OracleKind.ANALYTICAL
    sim_config: SimConfig = field(default_factory=SimConfig)

    def __post_init__(self):
        if self.threshold_us <= 0:
            raise ValueError("threshold_us must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class Cut:
    """No-good cut: the full member set may not be assigned to this site."""

    site: str
    members: frozenset[str]


@dataclass
class IlpModel:
    """Enable/assignment program, independent of any latency expression."""

    rus: list[str]
    mec_sites: list[str]
    reachable: dict[str, list[str]]  # ru -> candidate sites, sorted, may include CO
    capacity: dict[str, int]
    tree_of_mec: dict[str, str]
    tree_of_ru: dict[str, str]
    wavelengths_per_tree: int
    slice_wavelengths: int
    cuts: list[Cut] = field(default_factory=list)
    min_enabled: int = 0


@dataclass(frozen=True)
class IlpSolution:
    enabled: tuple[str, ...]
    assignment: dict[str, str]
    objective: int


@dataclass(frozen=True)
class SolvedSlice:
    slice: VPonSlice
    latency: LatencyEstimate | None  # None when the oracle reports instability

    @property
    def latency_us(self) -> float:
        return self.latency.mean_us if self.latency else math.inf


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    enabled_mecs: int
    cuts_total: int
    violations: int
    feasible: bool
    elapsed_s: float


@dataclass
class MaioSolution:
    status: MaioStatus
    enabled_mecs: tuple[str, ...]
    assignment: dict[str, str]
    slices: list[SolvedSlice]
    n_mec_lower_bound: int
    iterations_used: int
    cuts_added: int
    wall_time_s: float
    iteration_log: list[IterationRecord]
    infeasible_reason: str | None = None

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "enabled_mecs": list(self.enabled_mecs),
            "assignment": dict(sorted(self.assignment.items())),
            "slices": [
                {
                    "olt_site": s.slice.olt_site,
                    "members": [m.cell_id for m in s.slice.members],
                    "wavelengths": list(s.slice.wavelengths),
                    "mean_latency_us": None if s.latency is None else s.latency.mean_us,
                    "p99_latency_us": None if s.latency is None else s.latency.p99_us,
                    "latency_source": None if s.latency is None else s.latency.source.value,
                }
                for s in self.slices
            ],
            "n_mec_lower_bound": self.n_mec_lower_bound,
            "iterations_used": self.iterations_used,
            "cuts_added": self.cuts_added,
            "wall_time_s": self.wall_time_s,
            "infeasible_reason": self.infeasible_reason,
            "iteration_log": [
                {
                    "iteration": r.iteration,
                    "enabled_mecs": r.enabled_mecs,
                    "cuts_total": r.cuts_total,
                    "violations": r.violations,
                    "feasible": r.feasible,
                    "elapsed_s": r.elapsed_s,
                }
                for r in self.iteration_log
            ],
        }


def build_ilp_model(problem: MaioProblem) -> IlpModel:
    """Assemble the enable/assignment program with the reachability prefilter.

    A candidate (RU, site) pair survives only if its propagation delay alone
    fits the latency threshold; pairs on different level-2 trees drop out
    automatically because their path length is infinite.
    """
    layout = problem.layout
    per_km = problem.sim_config.propagation_us_per_km
    rus = [c.id for c in layout.small_cells]
    mec_sites = [m.id for m in layout.macro_sites]
    reachable: dict[str, list[str]] = {}
    for cell in layout.small_cells:
        sites = []
        if co_distance_km(layout, cell) * per_km <= problem.threshold_us:
            sites.append(CO_SITE)
        for m in layout.macro_sites:
            if east_west_distance_km(layout, cell, m) * per_km <= problem.threshold_us:
                sites.append(m.id)
        reachable[cell.id] = sorted(sites)
    return IlpModel(
        rus=rus,
        mec_sites=mec_sites,
        reachable=reachable,
        capacity={m.id: m.mec_capacity for m in layout.macro_sites},
        tree_of_mec={m.id: m.level2_id for m in layout.macro_sites},
        tree_of_ru={
            c.id: layout.macro(c.parent_macro).level2_id for c in layout.small_cells
        },
        wavelengths_per_tree=problem.wavelengths_per_tree,
        slice_wavelengths=problem.slice_wavelengths,
    )


def _capacity_floor(model: IlpModel) -> int:
    """Smallest MEC count whose combined capacity can hold the MEC-only RUs."""
    need = sum(1 for ru in model.rus if CO_SITE not in model.reachable[ru])
    if need == 0:
        return 0
    caps = sorted((model.capacity[m] for m in model.mec_sites), reverse=True)
    total = 0
    for k, cap in enumerate(caps, start=1):
        total += cap
        if total >= need:
            return k
    return len(caps) + 1  # cannot fit at any count


def _subset_plausible(model: IlpModel, subset: tuple[str, ...]) -> bool:
    chosen = set(subset)
    need = 0
    for ru in model.rus:
        options = model.reachable[ru]
        if not any(s == CO_SITE or s in chosen for s in options):
            return False
        if CO_SITE not in options:
            need += 1
    if need > sum(model.capacity[m] for m in subset):
        return False
    per_tree: dict[str, int] = {}
    for m in subset:
        tree = model.tree_of_mec[m]
        per_tree[tree] = per_tree.get(tree, 0) + 1
    return all(
        n * model.slice_wavelengths <= model.wavelengths_per_tree
        for n in per_tree.values()
    )


def _search_assignment(model: IlpModel, subset: tuple[str, ...]) -> dict[str, str] | None:
    """Backtracking search for a constraint-satisfying assignment.

    RUs are placed in ascending candidate-count order and candidate sites are
    tried lexicographically, so the first solution found is deterministic.
    """
    chosen = set(subset)
    candidates = {
        ru: [s for s in model.reachable[ru] if s == CO_SITE or s in chosen]
        for ru in model.rus
    }
    if any(not opts for opts in candidates.values()):
        return None
    order = sorted(model.rus, key=lambda r: (len(candidates[r]), r))

    cut_sizes = [len(c.members) for c in model.cuts]
    counts = [0] * len(model.cuts)
    cuts_for: dict[tuple[str, str], list[int]] = {}
    for ci, cut in enumerate(model.cuts):
        if cut.site != CO_SITE and cut.site not in chosen:
            continue
        for member in cut.members:
            cuts_for.setdefault((cut.site, member), []).append(ci)

    capacity = {m: model.capacity[m] for m in subset}
    slice_sites: dict[str, set[str]] = {}  # tree -> occupied slice sites
    assignment: dict[str, str] = {}

    def dfs(i: int) -> bool:
        if i == len(order):
            return True
        ru = order[i]
        for site in candidates[ru]:
            if site != CO_SITE and capacity[site] == 0:
                continue
            tree = model.tree_of_mec[site] if site != CO_SITE else model.tree_of_ru[ru]
            occupied = slice_sites.setdefault(tree, set())
            new_site = site not in occupied
            if (
                new_site
                and (len(occupied) + 1) * model.slice_wavelengths
                > model.wavelengths_per_tree
            ):
                continue
            touched = cuts_for.get((site, ru), ())
            completed = False
            for ci in touched:
                counts[ci] += 1
                if counts[ci] == cut_sizes[ci]:
                    completed = True
            if not completed:
                if site != CO_SITE:
                    capacity[site] -= 1
                if new_site:
                    occupied.add(site)
                assignment[ru] = site
                if dfs(i + 1):
                    return True
                del assignment[ru]
                if new_site:
                    occupied.discard(site)
                if site != CO_SITE:
                    capacity[site] += 1
            for ci in touched:
                counts[ci] -= 1
        return False

    return dict(assignment) if dfs(0) else None


def solve_ilp(model: IlpModel) -> IlpSolution | None:
    """Exact minimum-enabled-MEC solve by ordered subset enumeration.

    Instances are small (tens of RUs, around ten candidate MECs), so subsets
    are enumerated in ascending size and lexicographic order with capacity,
    reachability, wavelength, and cut pruning; the first satisfying
    assignment is the optimum with deterministic tie-breaking.
    """
    start = max(model.min_enabled, _capacity_floor(model))
    for k in range(start, len(model.mec_sites) + 1):
        for subset in itertools.combinations(model.mec_sites, k):
            if not _subset_plausible(model, subset):
                continue
            assignment = _search_assignment(model, subset)
            if assignment is not None:
                return IlpSolution(enabled=subset, assignment=assignment, objective=k)
    return None


def build_slices(
    problem: MaioProblem, assignment: dict[str, str]
) -> list[VPonSlice]:
    """Induced vPON slices of an assignment, ordered by OLT site.

    RUs assigned to the central office are grouped into one slice per
    level-2 tree, since a NORTH-SOUTH slice occupies spectrum on its own
    tree only.
    """
    layout = problem.layout
    groups: dict[tuple[str, str], list[str]] = {}
    for ru, site in assignment.items():
        if site == CO_SITE:
            tree = layout.macro(layout.cell(ru).parent_macro).level2_id
            key = (CO_SITE, tree)
        else:
            key = (site, "")
        groups.setdefault(key, []).append(ru)
    slices = []
    for (site, _tree), rus in sorted(groups.items()):
        members = []
        for ru in sorted(rus):
            cell = layout.cell(ru)
            if site == CO_SITE:
                distance = co_distance_km(layout, cell)
            else:
                distance = east_west_distance_km(layout, cell, site)
            members.append(
                SliceMember(
                    cell_id=ru,
                    distance_km=distance,
                    rate_bps=problem.traffic.rate_for(cell.split),
                )
            )
        slices.append(
            VPonSlice(
                olt_site=site,
                members=tuple(members),
                wavelengths=tuple(range(problem.slice_wavelengths)),
            )
        )
    return slices


def make_oracle(problem: MaioProblem) -> LatencyOracle:
    """Latency oracle per the problem's configuration.

    Any callable mapping a slice to a latency estimate can replace this,
    which is how an external simulator integrates with the loop.
    """
    if problem.oracle is OracleKind.ANALYTICAL:
        params = AnalyticalParams.from_sim_config(problem.sim_config)
        return lambda s: analytic_latency_us(s, params)
    return lambda s: simulate_slice(s, problem.sim_config)


def maio_optimize(problem: MaioProblem, oracle: LatencyOracle | None = None) -> MaioSolution:
    """Run the mixed analytical iterative optimization loop.

    Solve the latency-free program for the MEC lower bound, then alternate
    oracle evaluation and cut generation until every slice meets the
    threshold; after ``max_iterations`` at one MEC count, force the count one
    higher and continue.  Returns the first fully feasible solution together
    with the complete iteration log.
    """
    t0 = time.perf_counter()
    if oracle is None:
        oracle = make_oracle(problem)
    model = build_ilp_model(problem)

    stranded = sorted(ru for ru, sites in model.reachable.items() if not sites)
    if stranded:
        return _infeasible(
            f"reachability: propagation delay alone exceeds the threshold for {stranded}",
            t0,
        )

    base = solve_ilp(model)
    if base is None:
        return _infeasible(
            "capacity/wavelengths: no assignment satisfies the linear constraints",
            t0,
        )
    lower_bound = base.objective

    current = base
    log: list[IterationRecord] = []
    iteration = 0
    iter_at_level = 0
    bumped = False
    while True:
        solved = []
        violations = []
        for slice_ in build_slices(problem, current.assignment):
            try:
                estimate = oracle(slice_)
            except UnstableSliceError:
                estimate = None
            solved.append(SolvedSlice(slice=slice_, latency=estimate))
            if estimate is None or estimate.mean_us > problem.threshold_us:
                violations.append(slice_)
        iteration += 1
        iter_at_level += 1
        log.append(
            IterationRecord(
                iteration=iteration,
                enabled_mecs=len(current.enabled),
                cuts_total=len(model.cuts),
                violations=len(violations),
                feasible=not violations,
                elapsed_s=time.perf_counter() - t0,
            )
        )
        if not violations:
            return MaioSolution(
                status=MaioStatus.FEASIBLE_AT_BOUND if bumped else MaioStatus.OPTIMAL,
                enabled_mecs=tuple(sorted(current.enabled)),
                assignment=dict(current.assignment),
                slices=solved,
                n_mec_lower_bound=lower_bound,
                iterations_used=iteration,
                cuts_added=len(model.cuts),
                wall_time_s=time.perf_counter() - t0,
                iteration_log=log,
            )
        for slice_ in violations:
            model.cuts.append(
                Cut(site=slice_.olt_site, members=frozenset(m.cell_id for m in slice_.members))
            )
        if iter_at_level >= problem.max_iterations:
            forced = len(current.enabled) + 1
            if forced > len(model.mec_sites):
                return _infeasible(
                    "latency: threshold unsatisfiable even with every MEC enabled",
                    t0,
                    lower_bound,
                    iteration,
                    len(model.cuts),
                    log,
                )
            model.min_enabled = forced
            iter_at_level = 0
            bumped = True
        current = solve_ilp(model)
        if current is None:
            return _infeasible(
                "latency: accumulated cuts exclude every assignment at every MEC count",
                t0,
                lower_bound,
                iteration,
                len(model.cuts),
                log,
            )


def _infeasible(
    reason: str,
    t0: float,
    lower_bound: int = 0,
    iterations: int = 0,
    cuts: int = 0,
    log: list[IterationRecord] | None = None,
) -> MaioSolution:
    return MaioSolution(
        status=MaioStatus.INFEASIBLE,
        enabled_mecs=(),
        assignment={},
        slices=[],
        n_mec_lower_bound=lower_bound,
        iterations_used=iterations,
        cuts_added=cuts,
        wall_time_s=time.perf_counter() - t0,
        iteration_log=log or [],
        infeasible_reason=reason,
    )


@dataclass(frozen=True)
class SliceValidation:
    olt_site: str
    member_count: int
    planned_mean_us: float | None
    simulated: LatencyEstimate | None  # None when the simulator reports instability
    exceeds_threshold: bool


def evaluate_solution(
    solution: MaioSolution,
    problem: MaioProblem,
    sim_config: SimConfig | None = None,
) -> list[SliceValidation]:
    """Re-evaluate every solution slice with the simulator.

    Produces a validation report; slices whose simulated mean exceeds the
    threshold are flagged, not treated as failures.
    """
    config = sim_config or problem.sim_config
    report = []
    for solved in solution.slices:
        try:
            simulated = simulate_slice(solved.slice, config)
            exceeds = simulated.mean_us > problem.threshold_us
        except UnstableSliceError:
            simulated = None
            exceeds = True
        report.append(
            SliceValidation(
                olt_site=solved.slice.olt_site,
                member_count=len(solved.slice.members),
                planned_mean_us=None if solved.latency is None else solved.latency.mean_us,
                simulated=simulated,
                exceeds_threshold=exceeds,
            )
        )
    return report
