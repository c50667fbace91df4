"""Sparse virtual-source recovery for 3D radio environment maps.

Greedy sequential sparse Bayesian learning (GS-SBL) with OMP and free-space
baselines.
"""
from .baselines import fit_fspl_baseline, fit_omp
from .data import (MeasurementSet, SyntheticScene, filter_by_altitude, generate_synthetic,
                   load_measurements_csv, random_points, save_measurements_csv, survey_points, zigzag_points)
from .evaluation import EvalResult, predict, rmse_db, run_nsbl_sweep, run_separation_comparison
from .grid import VoxelGrid
from .gs_sbl import FitReport, deflate_residual, fit_gs_sbl, refine_power_scale, select_next_source
from .micro_sbl import MicroSblState, SblPriors, run_micro_sbl, score_candidate
from .model import SparseModel
from .persistence import load_model, save_model
from .propagation import (PropagationConfig, SensingMatrix, build_sensing_matrix, dbm_to_watts, fspl_gain,
                          watts_to_dbm)

__version__ = "0.1.0"

__all__ = [
    "EvalResult", "FitReport", "MeasurementSet", "MicroSblState", "PropagationConfig", "SblPriors",
    "SensingMatrix", "SparseModel", "SyntheticScene", "VoxelGrid", "build_sensing_matrix", "dbm_to_watts",
    "deflate_residual", "filter_by_altitude", "fit_fspl_baseline", "fit_gs_sbl", "fit_omp", "fspl_gain",
    "generate_synthetic", "load_measurements_csv", "load_model", "predict", "random_points", "refine_power_scale", "rmse_db",
    "run_micro_sbl", "run_nsbl_sweep", "run_separation_comparison", "save_measurements_csv", "save_model",
    "score_candidate", "select_next_source", "survey_points", "watts_to_dbm", "zigzag_points",
]
