"""Prediction, dB-domain RMSE and the two altitude-generalisation experiments."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .baselines import fit_fspl_baseline, fit_omp
from .data import MeasurementSet, filter_by_altitude
from .errors import ConfigurationError, DegenerateModelError
from .gs_sbl import fit_gs_sbl
from .grid import VoxelGrid
from .micro_sbl import DEFAULT_PRIORS, SblPriors
from .model import SparseModel
from .propagation import PropagationConfig, SensingMatrix, build_sensing_matrix, dbm_to_watts, watts_to_dbm

# Lower end of the RSRP reporting range. Predictions are floored here before
# conversion; only models with negative powers (OMP) can reach it.
PREDICTION_FLOOR_DBM = -140.0
NSBL_RANGE = range(1, 8)
SEPARATIONS_M = (0.0, 10.0, 20.0)


@dataclass
class EvalResult:
    algorithm: str
    rmse_db: float
    n_test: int
    per_point_error_db: np.ndarray = field(repr=False, default=None)
    n_sbl: int = 0
    train_z: tuple = ()
    test_z: tuple = ()
    separation_m: float = 0.0
    seed: int | None = None

    def row(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "n_sbl": self.n_sbl,
            "separation_m": self.separation_m,
            "seed": "" if self.seed is None else self.seed,
            "rmse_db": self.rmse_db,
            "n_test": self.n_test,
            "train_z_m": " ".join(f"{z:g}" for z in self.train_z),
            "test_z_m": " ".join(f"{z:g}" for z in self.test_z),
        }


def predict(model: SparseModel, points, floor_dbm: float = PREDICTION_FLOOR_DBM) -> np.ndarray:
    """Predicted RSS in dBm: ``rho * sum_j p_j * gain(point, source_j)``."""
    if model.n_sources == 0:
        raise DegenerateModelError("cannot predict from an empty model")
    w = model.predict_watts(points)
    return watts_to_dbm(np.maximum(w, dbm_to_watts(floor_dbm)))


def rmse_db(predicted, measured) -> float:
    p = np.asarray(predicted, dtype=float).reshape(-1)
    m = np.asarray(measured, dtype=float).reshape(-1)
    if p.shape != m.shape:
        raise ConfigurationError(f"length mismatch: {p.size} predictions vs {m.size} measurements")
    if p.size == 0:
        raise ConfigurationError("rmse of empty vectors")
    e = p - m
    return float(np.sqrt(np.mean(e * e)))


def evaluate(model: SparseModel, test: MeasurementSet, **descr) -> EvalResult:
    err = predict(model, test.points) - test.rsrp_dbm
    return EvalResult(
        algorithm=model.algorithm,
        rmse_db=float(np.sqrt(np.mean(err * err))),
        n_test=len(test),
        per_point_error_db=err,
        n_sbl=model.n_sources_requested,
        **descr,
    )


def _zs(ms: MeasurementSet) -> tuple:
    return tuple(float(z) for z in ms.metadata.get("altitudes", ()))


def run_nsbl_sweep(train: MeasurementSet, tests, phi: SensingMatrix, n_range=NSBL_RANGE,
                   priors: SblPriors = DEFAULT_PRIORS, threads: int = 1, seed=None) -> list[EvalResult]:
    """Fit GS-SBL for each sparsity level and score every test split.

    ``phi`` must be built on ``train.points``. Rows come out ordered by
    sparsity level, then test split.
    """
    tests = list(tests)
    if not tests:
        raise ConfigurationError("at least one test split is required")
    train_z = _zs(train)
    out = []
    for k in n_range:
        model, _ = fit_gs_sbl(train, phi, k, priors, threads=threads)
        for test in tests:
            test_z = _zs(test)
            sep = min((abs(a - b) for a in test_z for b in train_z), default=0.0)
            res = evaluate(model, test, train_z=train_z, test_z=test_z, separation_m=sep, seed=seed)
            res.n_sbl = k
            out.append(res)
    return out


def altitude_pairs(altitudes, separation: float, tol: float = 1e-6) -> list[tuple[float, float]]:
    """All ordered ``(train_z, test_z)`` pairs with ``|train_z - test_z| == separation``."""
    zs = sorted(float(z) for z in altitudes)
    return [(a, b) for a in zs for b in zs if abs(abs(a - b) - separation) <= tol]


def run_separation_comparison(data: MeasurementSet, altitudes, grid: VoxelGrid, config: PropagationConfig,
                              separations=SEPARATIONS_M, algorithms=("gs_sbl", "omp", "fspl"),
                              n_sources: int = 2, bs_location=None, priors: SblPriors = DEFAULT_PRIORS,
                              tolerance_m: float = 1.0, threads: int = 1, seed=None):
    """Train on one altitude, test on altitudes ``separation`` metres away.

    Returns ``(summary, pairs)``: ``pairs`` holds one result per algorithm
    and (train, test) altitude pair; ``summary`` averages RMSE over the pairs
    of each (separation, algorithm) cell. Separation 0 scores the training
    set itself.
    """
    if "fspl" in algorithms and bs_location is None:
        raise ConfigurationError("the FSPL baseline needs a base-station location")
    unknown = set(algorithms) - {"gs_sbl", "omp", "fspl"}
    if unknown:
        raise ConfigurationError(f"unknown algorithm(s): {sorted(unknown)}")
    plan = {}
    for s in separations:
        pairs = altitude_pairs(altitudes, float(s))
        if not pairs:
            raise ConfigurationError(f"no altitude pair is separated by {s} m")
        plan[float(s)] = pairs

    splits = {z: filter_by_altitude(data, [z], tolerance_m) for z in sorted(set(float(a) for a in altitudes))}
    models = {}

    def _model(algo, z):
        if (algo, z) not in models:
            train = splits[z]
            if algo == "fspl":
                models[algo, z] = fit_fspl_baseline(train, bs_location, config)
            else:
                phi = build_sensing_matrix(config, grid, train.points, threads=threads)
                if algo == "gs_sbl":
                    models[algo, z] = fit_gs_sbl(train, phi, n_sources, priors, threads=threads)[0]
                else:
                    models[algo, z] = fit_omp(train, phi, n_sources)
        return models[algo, z]

    pair_rows, summary = [], []
    for s, pairs in plan.items():
        for algo in algorithms:
            cell = []
            for ztr, zte in pairs:
                res = evaluate(_model(algo, ztr), splits[zte], train_z=(ztr,), test_z=(zte,),
                               separation_m=s, seed=seed)
                res.n_sbl = n_sources if algo != "fspl" else 1
                cell.append(res)
            pair_rows.extend(cell)
            summary.append(EvalResult(
                algorithm=algo,
                rmse_db=float(np.mean([r.rmse_db for r in cell])),
                n_test=int(sum(r.n_test for r in cell)),
                n_sbl=cell[0].n_sbl,
                train_z=tuple(sorted({p[0] for p in pairs})),
                test_z=tuple(sorted({p[1] for p in pairs})),
                separation_m=s,
                seed=seed,
            ))
    return summary, pair_rows
