"""Interference-aware weapon-target assignment over predicted intercept points."""
from .assignment import (
    AssignmentModel,
    Solution,
    brute_force_oracle,
    build_model,
    check_selection,
    evaluate_objective,
    model_to_lp,
    solve_exact,
)
from .dynamics import DynamicsParams, simulate_engagement, time_of_flight
from .interference import (
    CandidateId,
    InterferenceTable,
    build_interference_table,
    check_physical,
    check_seeker,
)
from .pipeline import RunConfig, RunReport, emit_schedule_plot_data, run_pipeline
from .pips import PipSet, build_pip_set, discretize_track
from .scenario import (
    Scenario,
    ScenarioError,
    build_w_formation_scenario,
    dump_scenario,
    generate_target_tracks,
    load_scenario,
    load_scenario_file,
)
from .trajectory import Outcome, Trajectory

__version__ = "0.1.0"
