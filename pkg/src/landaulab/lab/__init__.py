"""Scenario layer: configuration, decay fits, pipelines and the CLI."""
from .config import Scenario, build_scenario, load_scenario
from .fit import DecayFit, fit_decay, fit_trajectory
from .pipelines import amplitude_sweep, initial_field, run_pipeline

__all__ = ["Scenario", "build_scenario", "load_scenario", "DecayFit", "fit_decay", "fit_trajectory",
           "amplitude_sweep", "initial_field", "run_pipeline"]
