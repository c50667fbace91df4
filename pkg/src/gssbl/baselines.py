"""Comparison baselines: orthogonal matching pursuit and a single FSPL source."""
from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .model import SparseModel
from .propagation import PropagationConfig, SensingMatrix, fspl_gain, pairwise_distances

RIDGE = 1e-12


def _as_watts(y) -> np.ndarray:
    return np.asarray(getattr(y, "rss_w", y), dtype=float)


def _support_lstsq(cols: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, bool]:
    """Joint least squares over the selected columns.

    Columns are scaled to unit norm first (FSPL gains are ~1e-10). Falls back
    to a ridge-regularised normal-equation solve when the block is rank
    deficient; the second return value flags that case.
    """
    norms = np.sqrt(np.sum(cols * cols, axis=0))
    a = cols / norms
    if np.linalg.matrix_rank(a) < a.shape[1]:
        g = a.T @ a
        g = g + RIDGE * np.eye(g.shape[0])
        coef = np.linalg.solve(g, a.T @ y)
        return coef / norms, True
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    return coef / norms, False


def fit_omp(y, phi: SensingMatrix, n_sources: int, report: dict | None = None) -> SparseModel:
    """Orthogonal matching pursuit with normalised-correlation selection.

    ``report``, if given, is filled with per-stage residual norms and a
    ``rank_deficient`` flag.
    """
    y_w = _as_watts(y)
    m, n = phi.shape
    if y_w.shape != (m,):
        raise ConfigurationError(f"measurement vector has shape {y_w.shape}, sensing matrix has {m} rows")
    if not 1 <= n_sources <= n:
        raise ConfigurationError(f"n_sources must be in [1, {n}], got {n_sources}")
    if n_sources > m:
        raise ConfigurationError(f"OMP needs at least as many samples as sources ({m} < {n_sources})")

    norms = phi.column_norms
    available = norms > 0
    support: list[int] = []
    coef = np.empty(0)
    r = y_w.copy()
    residuals = [float(np.linalg.norm(r))]
    deficient = False
    for _ in range(n_sources):
        if residuals[-1] == 0.0 or not available.any():
            break
        corr = np.abs((phi.values * r[:, None]).sum(axis=0))
        score = np.where(available, corr / np.where(norms > 0, norms, 1.0), -np.inf)
        j = int(np.argmax(score))
        if score[j] <= 0:
            break
        support.append(j)
        available[j] = False
        coef, flag = _support_lstsq(phi.values[:, support], y_w)
        deficient |= flag
        r = y_w - phi.values[:, support] @ coef
        residuals.append(float(np.linalg.norm(r)))

    keep = coef != 0
    support = [s for s, k in zip(support, keep) if k]
    if report is not None:
        report.update(residual_norm_per_stage=residuals, rank_deficient=deficient)
    return SparseModel(
        algorithm="omp",
        support=tuple(support),
        positions=phi.grid.centers()[support] if support else np.empty((0, 3)),
        powers=coef[keep],
        rho=1.0,
        n_sources_requested=n_sources,
        propagation=phi.config,
        grid=phi.grid,
    )


def fit_fspl_baseline(y, source_location, config: PropagationConfig,
                      points=None, report: dict | None = None) -> SparseModel:
    """One source at a known location with its power fitted by 1-D least squares.

    ``points`` defaults to ``y.points`` when ``y`` is a measurement set. A
    non-positive fitted power yields an empty model flagged in ``report``.
    """
    y_w = _as_watts(y)
    if points is None:
        points = getattr(y, "points", None)
        if points is None:
            raise ConfigurationError("sample points are required for the FSPL baseline")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    src = np.asarray(source_location, dtype=float).reshape(1, 3)
    d = pairwise_distances(pts, src)[:, 0]
    flags = []
    if np.all(d <= config.min_distance_m):
        flags.append("degenerate_geometry")
    g = fspl_gain(config, np.maximum(d, config.min_distance_m) if config.min_distance_m > 0 else d)
    g = np.atleast_1d(g)
    power = float(np.dot(g, y_w) / np.dot(g, g))
    if report is not None:
        report["flags"] = flags
        report["fitted_power_w"] = power
    if not power > 0:
        flags.append("empty_model")
        return SparseModel("fspl", (), np.empty((0, 3)), np.empty(0), 1.0, 1, config)
    return SparseModel("fspl", (None,), src, np.array([power]), 1.0, 1, config)
