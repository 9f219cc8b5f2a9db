"""Variance reduction via accelerated dual averaging for composite finite sums."""
from .baselines import BaselineConfig, run_baseline, run_katyusha, run_mig, run_svrg
from .core_model import CompositeObjective, ProblemConstants, make_objective
from .data_io import (SparseDataset, add_bias, normalize_rows, parse_libsvm, ridge_problem,
                      synth_a9a_like, synth_ridge, write_libsvm)
from .errors import (AuditError, ConfigError, InputShapeError, LabelError, NumericOverflowError,
                     ParseError, ReferenceInconsistency, ScheduleSaturated, TuningError,
                     VradaError)
from .losses import FiniteSumLoss, LabeledSample, LossSpec, smoothness_bound
from .regularizers import Regularizer, make_regularizer
from .schedule import EpochSchedule, audit_schedule, s0_for, growth_lower_bounds
from .trace import SolverTrace, read_csv, write_csv
from .vrada_solver import VradaConfig, run, vr_gradient

__version__ = "0.1.0"

__all__ = [
    "BaselineConfig", "run_baseline", "run_katyusha", "run_mig", "run_svrg",
    "CompositeObjective", "ProblemConstants", "make_objective", "SparseDataset", "add_bias",
    "normalize_rows", "parse_libsvm", "ridge_problem", "synth_a9a_like", "synth_ridge",
    "write_libsvm", "AuditError", "ConfigError", "InputShapeError", "LabelError",
    "NumericOverflowError", "ParseError", "ReferenceInconsistency", "ScheduleSaturated",
    "TuningError", "VradaError", "FiniteSumLoss", "LabeledSample", "LossSpec",
    "smoothness_bound", "Regularizer", "make_regularizer", "EpochSchedule", "audit_schedule",
    "s0_for", "growth_lower_bounds", "SolverTrace", "read_csv", "write_csv", "VradaConfig",
    "run", "vr_gradient",
]
