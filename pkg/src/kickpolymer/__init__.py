"""Directed polymers in a random kick potential and the kick-forced viscous Burgers equation."""

from .env import Environment, EnvironmentSpec, Shear, Shift, sample_environment, transform_environment
from .experiments import ExperimentConfig, ExperimentReport, run_experiment
from .lattice import Grid, LogDensity, TransferKernel
from .partition import log_partition_p2p, log_partition_slice, log_partition_star
from .polymer import PolymerMeasure, TerminalMeasure, sample_paths
from .validation import validate

__all__ = ["Environment", "EnvironmentSpec", "ExperimentConfig", "ExperimentReport", "Grid", "LogDensity",
           "PolymerMeasure", "Shear", "Shift", "TerminalMeasure", "TransferKernel", "log_partition_p2p",
           "log_partition_slice", "log_partition_star", "run_experiment", "sample_environment", "sample_paths",
           "transform_environment", "validate"]
