"""Greedy sequential SBL: pick one voxel per stage by Micro-SBL misfit,
deflate the residual with a non-negativity clip, then rescale all powers by a
single least-squares factor."""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DegenerateModelError, NoCandidateError
from .micro_sbl import DEFAULT_PRIORS, SblPriors, score_candidates
from .model import SparseModel, superpose
from .propagation import SensingMatrix

RHO_FLOOR = 1e-9
# Candidates per work unit. Independent of the worker count, so results are
# the same for any number of threads.
CANDIDATE_CHUNK = 256


@dataclass(frozen=True)
class Selection:
    index: int
    power: float
    error: float
    n_evaluated: int


@dataclass
class FitReport:
    residual_norm_per_stage: list = field(default_factory=list)
    selected_errors: list = field(default_factory=list)
    candidates_evaluated: list = field(default_factory=list)
    wall_time: float = 0.0
    stopped_early: bool = False
    rho_unclamped: float | None = None
    rho_clamped: bool = False
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "residual_norm_per_stage": [float(v) for v in self.residual_norm_per_stage],
            "selected_errors": [float(v) for v in self.selected_errors],
            "candidates_evaluated": [int(v) for v in self.candidates_evaluated],
            "wall_time_s": self.wall_time,
            "stopped_early": self.stopped_early,
            "rho_unclamped": self.rho_unclamped,
            "rho_clamped": self.rho_clamped,
            "flags": list(self.flags),
        }


def _as_watts(y) -> np.ndarray:
    return np.asarray(getattr(y, "rss_w", y), dtype=float)


def deflate_residual(y, support, powers, phi: SensingMatrix) -> np.ndarray:
    """``max(0, y - sum_j phi_{i_j} p_j)``; returns ``y`` itself for an empty support."""
    y = _as_watts(y)
    if len(support) == 0:
        return y.copy()
    recon = superpose(phi.values[:, list(support)], powers)
    return np.maximum(0.0, y - recon)


def _chunks(idx: np.ndarray):
    return [idx[i:i + CANDIDATE_CHUNK] for i in range(0, idx.size, CANDIDATE_CHUNK)]


def select_next_source(y_res, phi: SensingMatrix, priors: SblPriors = DEFAULT_PRIORS,
                       excluded=(), threads: int = 1) -> Selection | None:
    """Score every admissible voxel with Micro-SBL and return the best one.

    Returns ``None`` when no candidate has a positive posterior mean that
    lowers the residual. Ties go to the lowest voxel index.

    Scoring is done on a rescaled copy of the problem (unit-norm columns and
    residual) so the Gamma hyperpriors act the same whatever the absolute
    power level; the selected power is mapped back to Watts.
    """
    y_res = _as_watts(y_res)
    norms = phi.column_norms
    mask = norms > 0
    if len(excluded):
        mask[np.fromiter(excluded, dtype=int)] = False
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise NoCandidateError("no admissible candidate voxels remain")
    scale = float(np.sqrt(np.sum(y_res * y_res)))
    if scale == 0.0:
        return None
    target = y_res / scale

    def _score(chunk):
        cols = phi.values[:, chunk] / norms[chunk]
        mu, err, _ = score_candidates(cols, target, priors)
        return mu, err

    parts = _chunks(idx)
    if threads > 1 and len(parts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_score, parts))
    else:
        results = [_score(c) for c in parts]
    mu = np.concatenate([r[0] for r in results])
    err = np.concatenate([r[1] for r in results])

    base = float(np.sum(target * target))
    ok = (mu > 0) & (err < base)
    if not ok.any():
        return None
    best = int(np.argmin(np.where(ok, err, np.inf)))
    j = int(idx[best])
    return Selection(
        index=j,
        power=float(mu[best] * scale / norms[j]),
        error=float(err[best] * scale * scale),
        n_evaluated=int(idx.size),
    )


def _rho_least_squares(y, support, powers, phi: SensingMatrix) -> float:
    s = superpose(phi.values[:, list(support)], powers)
    ss = float(np.dot(s, s))
    if not ss > 0:
        raise DegenerateModelError("model reconstruction is identically zero")
    return float(np.dot(s, _as_watts(y))) / ss


def refine_power_scale(y, support, powers, phi: SensingMatrix) -> float:
    """Closed-form 1-D least-squares scale for the whole model, clamped to ``(0, 1]``."""
    rho = _rho_least_squares(y, support, powers, phi)
    return float(min(1.0, max(RHO_FLOOR, rho)))


def fit_gs_sbl(y, phi: SensingMatrix, n_sources: int, priors: SblPriors = DEFAULT_PRIORS,
               threads: int = 1) -> tuple[SparseModel, FitReport]:
    t0 = time.perf_counter()
    y_w = _as_watts(y)
    m, n = phi.shape
    if y_w.shape != (m,):
        raise ConfigurationError(f"measurement vector has shape {y_w.shape}, sensing matrix has {m} rows")
    if not 1 <= n_sources <= n:
        raise ConfigurationError(f"n_sources must be in [1, {n}], got {n_sources}")

    report = FitReport()
    support: list[int] = []
    powers: list[float] = []
    res = deflate_residual(y_w, support, powers, phi)
    report.residual_norm_per_stage.append(float(np.sqrt(np.sum(res * res))))
    for _ in range(n_sources):
        sel = select_next_source(res, phi, priors, excluded=support, threads=threads)
        if sel is None:
            report.stopped_early = True
            break
        support.append(sel.index)
        powers.append(sel.power)
        report.selected_errors.append(sel.error)
        report.candidates_evaluated.append(sel.n_evaluated)
        res = deflate_residual(y_w, support, powers, phi)
        report.residual_norm_per_stage.append(float(np.sqrt(np.sum(res * res))))

    rho = 1.0
    if support:
        raw = _rho_least_squares(y_w, support, powers, phi)
        report.rho_unclamped = raw
        rho = float(min(1.0, max(RHO_FLOOR, raw)))
        report.rho_clamped = rho != raw
        if raw <= 0:
            report.flags.append("rho_nonpositive")
    else:
        report.flags.append("empty_model")

    model = SparseModel(
        algorithm="gs_sbl",
        support=tuple(support),
        positions=phi.grid.centers()[support] if support else np.empty((0, 3)),
        powers=np.asarray(powers),
        rho=rho,
        n_sources_requested=n_sources,
        propagation=phi.config,
        grid=phi.grid,
    )
    report.wall_time = time.perf_counter() - t0
    return model, report
