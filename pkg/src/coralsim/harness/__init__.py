"""Experiment orchestration: specs, training runs, trend fits, evaluation."""

from .evaluate import (DeviationReport, evaluate_policy, ideal_polyline,
                       path_deviation, point_to_polyline_distance)
from .report import MissingArtifactError, emit_report, read_reward_curve
from .run import RunResult, latest_checkpoint, run_experiment
from .spec import (ExperimentSpec, checkpoint_extras, experiment_spec_from_dict,
                   experiment_spec_to_dict, load_experiment_spec,
                   save_experiment_spec)
from .trend import DegenerateInputError, TrendFit, fit_trend

__all__ = [
    "DegenerateInputError", "DeviationReport", "ExperimentSpec",
    "MissingArtifactError", "RunResult", "TrendFit", "checkpoint_extras",
    "emit_report", "evaluate_policy", "experiment_spec_from_dict",
    "experiment_spec_to_dict", "fit_trend", "ideal_polyline",
    "latest_checkpoint", "load_experiment_spec", "path_deviation",
    "point_to_polyline_distance", "read_reward_curve", "run_experiment",
    "save_experiment_spec",
]
