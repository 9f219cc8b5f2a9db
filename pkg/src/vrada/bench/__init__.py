"""Benchmark harness: reference solutions, L tuning and the experiment runner."""
from .experiment import ExperimentConfig, ExperimentResult, build_problem, run_cell, run_experiment
from .reference import Reference, compute_reference, load_reference, reference_for, save_reference
from .tuning import DEFAULT_GRID, GridOutcome, TuningResult, tune_L

__all__ = [
    "ExperimentConfig", "ExperimentResult", "build_problem", "run_cell", "run_experiment",
    "Reference", "compute_reference", "load_reference", "reference_for", "save_reference",
    "DEFAULT_GRID", "GridOutcome", "TuningResult", "tune_L",
]
