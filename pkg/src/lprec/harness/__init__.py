"""Experiment configs, deterministic runners and CSV output."""

from lprec.harness.config import KINDS, SCHEMA_VERSION, ExperimentConfig, load_config
from lprec.harness.experiments import (
    ArmResult,
    run_bounds_check,
    run_cancellation_study,
    run_experiment,
    run_format_sweep,
    run_lsq_experiment,
    run_mlp_demo,
)

__all__ = [
    "KINDS",
    "SCHEMA_VERSION",
    "ExperimentConfig",
    "load_config",
    "ArmResult",
    "run_bounds_check",
    "run_cancellation_study",
    "run_experiment",
    "run_format_sweep",
    "run_lsq_experiment",
    "run_mlp_demo",
]
