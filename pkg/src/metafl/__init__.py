"""Deterministic simulator of federated learning under backdoor attack:
baseline FL and the meta variant (cohort aggregates over simulated
secure aggregation), six robust aggregation rules and two attack
schemes, with a reproducible experiment harness.
"""
from .config import ExperimentConfig, parse_config
from .orchestrator import MetricsLog, run_experiment

__version__ = "0.1.0"

__all__ = ["ExperimentConfig", "MetricsLog", "parse_config", "run_experiment", "__version__"]
