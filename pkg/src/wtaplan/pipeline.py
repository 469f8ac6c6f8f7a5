"""End-to-end run: tracks -> PIPs -> interference table -> model -> solve -> files.

Output directory layout (version 1)::

    scenario.snapshot.yaml      resolved scenario, re-loadable
    pips.tsv                    PIP set with per-farm launch time / feasibility
    interference.pairs.tsv      sparse pair list (absent with --no-interference)
    heatmap_<kind>_<fa>_<fb>.tsv  dense 0/1 farm-vs-farm tables
    model.lp                    model actually solved (CPLEX LP text)
    solution.tsv                selected assignments
    schedule.tsv                launch windows and launches (Fig-7 style data)
    report.yaml                 run summary
    trajectories/               per-engagement samples (--dump-trajectories)

In compare mode the interference-free run adds ``model_no_interference.lp``,
``solution_no_interference.tsv`` and ``schedule_no_interference.tsv``.
Wall-clock timings are kept on the in-memory report only, so two runs with the
same inputs write byte-identical directories.
"""
from __future__ import annotations

import hashlib
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .assignment import (
    AssignmentModel,
    Solution,
    build_model,
    check_selection,
    evaluate_objective,
    model_to_lp,
    solve_exact,
)
from .interference import KINDS, InterferenceTable, build_interference_table, interference_stats
from .pips import PipSet, build_pip_set
from .scenario import Scenario, dump_scenario, generate_target_tracks

log = logging.getLogger(__name__)

LAYOUT_VERSION = 1


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        super().__init__(f"[{stage}] {cause}")


@dataclass
class RunConfig:
    seed: int = 0
    interference: bool = True
    compare: bool = False
    include_all: bool = False
    dump_trajectories: bool = False
    max_nodes: int | None = 200_000
    time_limit: float | None = 600.0
    workers: int = 1


@dataclass
class RunReport:
    scenario_digest: str
    seed: int
    n_targets: int
    n_pips: int
    feasible_candidates: dict[str, int]
    interference: dict | None
    solutions: dict[str, dict]
    warnings: list[str] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "layout_version": LAYOUT_VERSION,
            "scenario_digest": self.scenario_digest,
            "seed": self.seed,
            "targets": self.n_targets,
            "pips": self.n_pips,
            "feasible_candidates": self.feasible_candidates,
            "interference": self.interference,
            "solutions": self.solutions,
            "warnings": self.warnings,
        }


def emit_schedule_plot_data(solution: Solution, pip_set: PipSet, model: AssignmentModel | None = None) -> str:
    """Launch windows per (farm, target) plus one row per selected launch.

    ``interval`` rows carry the min/max feasible launch time; ``launch`` rows
    carry the launch time in both columns and the chosen PIP index.
    """
    lines = ["kind\tfarm\ttarget\tpip_index\tt_start\tt_end"]
    for (farm, target), (lo, hi) in pip_set.launch_windows().items():
        lines.append(f"interval\t{farm}\t{target}\t\t{lo:.6f}\t{hi:.6f}")
    for farm, launches in solution.schedule.items():
        for t, c in launches:
            lines.append(f"launch\t{farm}\t{c.target_id}\t{c.index}\t{t:.6f}\t{t:.6f}")
    return "\n".join(lines) + "\n"


def heatmap_tsv(mat: np.ndarray, pip_set: PipSet) -> str:
    labels = [f"{p.target_id}#{p.index}" for p in pip_set.pips]
    lines = ["\t".join(["pip"] + labels)]
    for label, row in zip(labels, mat):
        lines.append(label + "\t" + "\t".join("1" if v else "0" for v in row))
    return "\n".join(lines) + "\n"


def _solution_summary(sol: Solution, model: AssignmentModel) -> dict:
    return {
        "weapons_assigned": sol.weapons_assigned,
        "objective": float(sol.objective),
        "optimal": bool(sol.optimal),
        "bound": float(sol.bound),
        "gap": float(sol.gap),
        "nodes": sol.nodes,
        "variables": model.n_vars,
        "conflict_pairs": len(model.conflicts),
        "remaining_log_value": {t: float(v) for t, v in sol.remaining.items()},
        "schedule": {
            farm: [
                {"launch_time": round(float(t), 6), "target": c.target_id, "pip_index": c.index}
                for t, c in launches
            ]
            for farm, launches in sol.schedule.items()
        },
    }


def _stage(name, timings, fn, *args, **kwargs):
    start = time.perf_counter()
    try:
        result = fn(*args, **kwargs)
    except Exception as exc:  # noqa: BLE001 - tag and re-raise
        raise StageError(name, exc) from exc
    timings[name] = timings.get(name, 0.0) + time.perf_counter() - start
    log.info("%s done in %.2f s", name, timings[name])
    return result


def _solve(model: AssignmentModel, config: RunConfig) -> Solution:
    sol = solve_exact(model, max_nodes=config.max_nodes, time_limit=config.time_limit)
    problems = check_selection(model, sol.selected)
    if problems:
        raise AssertionError("solver returned an infeasible selection: " + "; ".join(problems[:5]))
    if abs(evaluate_objective(sol.selected, model) - sol.objective) > 1e-9:
        raise AssertionError("solver objective disagrees with recomputation")
    return sol


def run_pipeline(scenario: Scenario, out_dir, config: RunConfig | None = None) -> RunReport:
    config = config or RunConfig()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    timings: dict[str, float] = {}

    snapshot = dump_scenario(scenario)
    (out / "scenario.snapshot.yaml").write_text(snapshot)

    tracks = _stage("tracks", timings, generate_target_tracks, scenario, config.seed)
    pip_set = _stage("pips", timings, build_pip_set, scenario, tracks)
    (out / "pips.tsv").write_text(pip_set.to_tsv())
    if config.dump_trajectories:
        tdir = out / "trajectories"
        tdir.mkdir(exist_ok=True)
        for (farm, target, i), traj in sorted(pip_set.trajectories.items()):
            (tdir / f"{farm}_{target}_{i}.tsv").write_text(traj.to_tsv())

    want_table = config.interference or config.compare
    table: InterferenceTable | None = None
    stats = None
    if want_table:
        delays = {f.id: f.launch_delay for f in scenario.weapon_farms}
        table = _stage(
            "interference", timings, build_interference_table, pip_set,
            scenario.interference_params, delays, config.include_all, config.workers,
        )
        stats = interference_stats(table, pip_set)
        (out / "interference.pairs.tsv").write_text(table.to_tsv())
        farms = pip_set.farm_ids
        for a in range(len(farms)):
            for b in range(a, len(farms)):
                for kind in KINDS:
                    mat = table.heatmap(kind, farms[a], farms[b], pip_set)
                    (out / f"heatmap_{kind}_{farms[a]}_{farms[b]}.tsv").write_text(heatmap_tsv(mat, pip_set))

    runs = []
    if config.compare:
        runs = [("with_interference", table, ""), ("without_interference", None, "_no_interference")]
    elif config.interference:
        runs = [("with_interference", table, "")]
    else:
        runs = [("without_interference", None, "")]

    solutions = {}
    for label, tab, suffix in runs:
        model = _stage("model", timings, build_model, pip_set, tab, scenario)
        (out / f"model{suffix}.lp").write_text(model_to_lp(model))
        sol = _stage("solve", timings, _solve, model, config)
        (out / f"solution{suffix}.tsv").write_text(sol.to_tsv(model))
        (out / f"schedule{suffix}.tsv").write_text(emit_schedule_plot_data(sol, pip_set, model))
        solutions[label] = _solution_summary(sol, model)
        if not sol.optimal:
            log.warning("%s: node/time budget exhausted, gap %.3f", label, sol.gap)

    feasible = {f: sum(1 for p in pip_set if p.feasible_for(f)) for f in pip_set.farm_ids}
    report = RunReport(
        scenario_digest=hashlib.sha256(snapshot.encode()).hexdigest(),
        seed=config.seed,
        n_targets=len(tracks),
        n_pips=len(pip_set),
        feasible_candidates=feasible,
        interference=stats,
        solutions=solutions,
        warnings=list(pip_set.warnings),
        timings=timings,
    )
    (out / "report.yaml").write_text(yaml.safe_dump(report.to_dict(), sort_keys=False))
    return report
