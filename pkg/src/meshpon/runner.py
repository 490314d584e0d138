"""Command implementations shared by the service endpoints and the CLI.

Each ``run_*`` function maps an :class:`ExperimentConfig` to a JSON-ready
result dict; ``write_artifacts`` persists a result to disk.  Every artifact
embeds the resolved configuration and seed; the only volatile fields are the
``generated_at`` timestamp and measured wall/elapsed times.
"""

from __future__ import annotations

import io
import json
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .config import (
    ConfigError,
    ExperimentConfig,
    analytical_params_from,
    budget_params_from,
    layout_from,
    maio_problem_from,
    sim_config_from,
)
from .despon import (
    UnstableSliceError,
    VPonSlice,
    build_slice,
    simulate_slice,
    wavelength_utilizations,
)
from .latmodel import analytic_latency_us, feasibility_region
from .maio import MaioStatus, maio_optimize
from .powerbudget import BudgetClass, loss_table
from .topology import assignment_csv, layout_to_dict


def _run_block(cfg: ExperimentConfig, command: str) -> dict:
    return {
        "tool": "meshpon",
        "version": __version__,
        "command": command,
        "seed": cfg.seed,
        "config": cfg.resolved(),
        "generated_at": datetime.now(timezone.utc).isoformat(),
    }


def _class_label(cls: BudgetClass | None) -> str:
    return cls.value if cls is not None else "infeasible"


def run_budget(cfg: ExperimentConfig) -> dict:
    rows = loss_table(
        params=budget_params_from(cfg),
        configurations=[tuple(c) for c in cfg.budget.configurations],
        drop_km=cfg.budget.drop_km,
        trunk_km=cfg.budget.trunk_km,
        level1_edfa_gain_db=cfg.budget.level1_edfa_gain_db,
    )
    out = []
    for row in rows:
        out.append(
            {
                "reflection": "level1",
                "total_split": row.total_split,
                "stage1": row.stage1,
                "stage2": "",
                "loss_no_edfa_db": round(row.level1_loss_db, 4),
                "class_no_edfa": _class_label(row.level1_class),
                "edfa_gain_db": cfg.budget.level1_edfa_gain_db,
                "loss_with_edfa_db": round(row.level1_edfa_loss_db, 4),
                "class_with_edfa": _class_label(row.level1_edfa_class),
                "required_gain_n1_db": _required_level1_gain(row.level1_loss_db, cfg),
            }
        )
    for row in rows:
        out.append(
            {
                "reflection": "via_level2",
                "total_split": row.total_split,
                "stage1": row.stage1,
                "stage2": row.stage2,
                "loss_no_edfa_db": round(row.level2_loss_db, 4),
                "class_no_edfa": _class_label(row.level2_class),
                "edfa_gain_db": row.level2_edfa_gain_db,
                "loss_with_edfa_db": round(row.level2_edfa_loss_db, 4),
                "class_with_edfa": _class_label(row.level2_edfa_class),
                "required_gain_n1_db": row.level2_edfa_gain_db,
            }
        )
    return {"run": _run_block(cfg, "budget"), "rows": out}


def _required_level1_gain(loss_db: float, cfg: ExperimentConfig) -> int:
    import math

    excess = loss_db - 29.0
    return 0 if excess <= 0 else math.ceil(round(excess, 6))


def budget_csv(result: dict) -> str:
    buf = io.StringIO()
    buf.write(f"# seed={result['run']['seed']}\n")
    buf.write(
        "reflection,total_split,stage1,stage2,loss_no_edfa_db,class_no_edfa,"
        "edfa_gain_db,loss_with_edfa_db,class_with_edfa,required_gain_n1_db\n"
    )
    for r in result["rows"]:
        buf.write(
            f"{r['reflection']},{r['total_split']},{r['stage1']},{r['stage2']},"
            f"{r['loss_no_edfa_db']:.2f},{r['class_no_edfa']},{r['edfa_gain_db']:g},"
            f"{r['loss_with_edfa_db']:.2f},{r['class_with_edfa']},{r['required_gain_n1_db']}\n"
        )
    return buf.getvalue()


def run_simulate(cfg: ExperimentConfig) -> dict:
    """Simulate the configured synthetic slice; raises UnstableSliceError."""
    sim = sim_config_from(cfg)
    section = cfg.vpon_slice
    load = cfg.traffic.load if section.load is None else section.load
    slice_ = build_slice(
        n71=section.n71,
        n72=section.n72,
        load=load,
        config=sim,
        distance_km=section.distance_km,
        n_wavelengths=section.wavelengths,
        target_utilization=section.target_utilization,
    )
    estimate, trace = simulate_slice(slice_, sim, return_trace=True)
    analytical = analytic_latency_us(slice_, analytical_params_from(cfg))
    result = {
        "run": _run_block(cfg, "simulate"),
        "slice": {
            "olt_site": slice_.olt_site,
            "n71": section.n71,
            "n72": section.n72,
            "load": load,
            "distance_km": section.distance_km,
            "members": len(slice_.members),
            "wavelengths": len(slice_.wavelengths),
            "aggregate_rate_bps": slice_.aggregate_rate_bps,
            "utilizations": [round(u, 6) for u in wavelength_utilizations(slice_, sim)],
        },
        "estimate": {
            "mean_us": estimate.mean_us,
            "p99_us": estimate.p99_us,
            "frames_measured": estimate.frames_measured,
            "source": estimate.source.value,
        },
        "analytical_mean_us": analytical.mean_us,
        "counters": {
            "frames_generated": trace.frames_generated,
            "frames_delivered": trace.frames_delivered,
            "frames_in_flight": trace.frames_in_flight,
        },
    }
    if section.trace:
        result["trace_csv"] = trace.to_csv()
    return result


def run_region(cfg: ExperimentConfig) -> dict:
    params = analytical_params_from(cfg)
    points = feasibility_region(
        loads=cfg.region.loads,
        threshold_us=cfg.region.threshold_us,
        params=params,
        max_n71=cfg.region.max_n71,
        max_n72=cfg.region.max_n72,
        distance_km=cfg.region.distance_km,
        n_wavelengths=cfg.region.wavelengths,
    )
    sim = sim_config_from(cfg)
    rows = []
    for p in points:
        row = {
            "load": p.load,
            "n71": p.n71,
            "n72": p.n72,
            "latency_us": p.latency_us,
            "feasible": p.feasible,
            "boundary": p.boundary,
            "sim_mean_us": None,
        }
        if cfg.region.crosscheck_boundary and p.boundary and (p.n71 or p.n72):
            slice_ = build_slice(
                p.n71, p.n72, p.load, sim, cfg.region.distance_km, cfg.region.wavelengths
            )
            try:
                row["sim_mean_us"] = simulate_slice(slice_, sim).mean_us
            except UnstableSliceError:
                row["sim_mean_us"] = None
        rows.append(row)
    return {"run": _run_block(cfg, "region"), "points": rows}


def region_csv(result: dict) -> str:
    buf = io.StringIO()
    buf.write(f"# seed={result['run']['seed']}\n")
    buf.write("load,n71,n72,latency_us,feasible,boundary,sim_mean_us\n")
    for p in result["points"]:
        latency = "" if p["latency_us"] is None else f"{p['latency_us']:.4f}"
        sim = "" if p["sim_mean_us"] is None else f"{p['sim_mean_us']:.4f}"
        buf.write(
            f"{p['load']:g},{p['n71']},{p['n72']},{latency},"
            f"{int(p['feasible'])},{int(p['boundary'])},{sim}\n"
        )
    return buf.getvalue()


def run_optimize(cfg: ExperimentConfig) -> dict:
    layout = layout_from(cfg)
    loads = cfg.maio.loads or [cfg.traffic.load]
    sweeps = cfg.maio.iterations_sweep or [cfg.maio.max_iterations]
    runs = []
    for load in loads:
        for max_iterations in sweeps:
            problem = maio_problem_from(cfg, layout, load=load, max_iterations=max_iterations)
            solution = maio_optimize(problem)
            links = []
            for solved in solution.slices:
                for member in solved.slice.members:
                    links.append(
                        {
                            "ru": member.cell_id,
                            "olt_site": solved.slice.olt_site,
                            "distance_km": member.distance_km,
                        }
                    )
            runs.append(
                {
                    "load": load,
                    "max_iterations": max_iterations,
                    "solution": solution.to_dict(),
                    "slice_links": links,
                }
            )
    return {
        "run": _run_block(cfg, "optimize"),
        "layout": layout_to_dict(layout),
        "assignment_csv": assignment_csv(layout),
        "runs": runs,
    }


def iterations_csv(result: dict) -> str:
    buf = io.StringIO()
    buf.write(f"# seed={result['run']['seed']}\n")
    buf.write(
        "load,max_iterations,iteration,enabled_mecs,cuts_total,violations,feasible,elapsed_s\n"
    )
    for run in result["runs"]:
        for rec in run["solution"]["iteration_log"]:
            buf.write(
                f"{run['load']:g},{run['max_iterations']},{rec['iteration']},"
                f"{rec['enabled_mecs']},{rec['cuts_total']},{rec['violations']},"
                f"{int(rec['feasible'])},{rec['elapsed_s']:.6f}\n"
            )
    return buf.getvalue()


def _dump_json(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def write_artifacts(command: str, result: dict, out_dir: str | Path) -> list[Path]:
    """Persist a command result; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def _write(name: str, text: str) -> None:
        path = out / name
        path.write_text(text)
        written.append(path)

    if command == "budget":
        _write("budget.json", _dump_json(result))
        _write("budget.csv", budget_csv(result))
    elif command == "simulate":
        trace = result.pop("trace_csv", None)
        _write("latency.json", _dump_json(result))
        if trace is not None:
            _write("frames.csv", trace)
    elif command == "region":
        _write("region.json", _dump_json(result))
        _write("region.csv", region_csv(result))
    elif command == "optimize":
        assignment = result.pop("assignment_csv")
        _write("solution.json", _dump_json(result))
        _write("iterations.csv", iterations_csv(result))
        _write(
            "layout.json",
            _dump_json(
                {
                    "run": result["run"],
                    "layout": result["layout"],
                    "runs": [
                        {
                            "load": r["load"],
                            "max_iterations": r["max_iterations"],
                            "enabled_mecs": r["solution"]["enabled_mecs"],
                            "slice_links": r["slice_links"],
                        }
                        for r in result["runs"]
                    ],
                }
            ),
        )
        _write("assignment.csv", assignment)
    else:
        raise ValueError(f"unknown command {command}")
    return written


def optimize_infeasible(result: dict) -> str | None:
    """Reason string when any optimize run came back infeasible, else None."""
    for run in result["runs"]:
        if run["solution"]["status"] == MaioStatus.INFEASIBLE.value:
            return run["solution"]["infeasible_reason"] or "infeasible"
    return None
