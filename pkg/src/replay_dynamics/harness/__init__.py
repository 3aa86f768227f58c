"""Experiment orchestration: simulations, theory curves, sweeps and output."""

from .config import ExperimentConfig
from .experiments import (
    AerComparison,
    LineSearchTrace,
    SweepResult,
    classify_difference,
    compare_per,
    difference_map,
    run_aer,
    run_analytic,
    run_dqn,
    run_linesearch,
    run_ode,
    simulate_linesearch,
    sweep_M,
)
from .output import emit, read_table

__all__ = [
    "AerComparison", "ExperimentConfig", "LineSearchTrace", "SweepResult", "classify_difference",
    "compare_per", "difference_map", "emit", "read_table", "run_aer", "run_analytic", "run_dqn",
    "run_linesearch", "run_ode", "simulate_linesearch", "sweep_M",
]
