from .config import ExperimentConfig, load_config
from .experiments import ExperimentReport, emit_plot_data, expand_cells, run_cell, run_experiment

__all__ = ["ExperimentConfig", "load_config", "ExperimentReport", "emit_plot_data", "expand_cells",
           "run_cell", "run_experiment"]
