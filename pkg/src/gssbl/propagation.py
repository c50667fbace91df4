"""Free-space path loss sensing matrix and dBm/Watt conversion.

All recovery arithmetic happens on linear powers (Watts); dB only appears at
the edges (ingestion and error reporting).
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError
from .grid import VoxelGrid

SPEED_OF_LIGHT = 299_792_458.0  # m/s
DEFAULT_FREQUENCY_HZ = 3.5e9
MIN_DISTANCE_M = 1.0

# Rows per block when building the sensing matrix. Fixed so output does not
# depend on the worker count.
_ROW_BLOCK = 1024


@dataclass(frozen=True)
class PropagationConfig:
    frequency_hz: float = DEFAULT_FREQUENCY_HZ
    gain_tx: float = 1.0
    gain_rx: float = 1.0
    # distances below this are clamped (near-field guard)
    min_distance_m: float = MIN_DISTANCE_M

    def __post_init__(self):
        if not (np.isfinite(self.frequency_hz) and self.frequency_hz > 0):
            raise ConfigurationError(f"frequency_hz must be positive, got {self.frequency_hz}")
        if not (self.gain_tx >= 0 and self.gain_rx >= 0):
            raise ConfigurationError("antenna gains must be non-negative")
        if not self.min_distance_m >= 0:
            raise ConfigurationError("min_distance_m must be non-negative")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.frequency_hz

    @classmethod
    def from_dbi(cls, frequency_hz=DEFAULT_FREQUENCY_HZ, gain_tx_dbi=0.0, gain_rx_dbi=0.0,
                 min_distance_m=MIN_DISTANCE_M) -> "PropagationConfig":
        return cls(
            frequency_hz=float(frequency_hz),
            gain_tx=10.0 ** (gain_tx_dbi / 10.0),
            gain_rx=10.0 ** (gain_rx_dbi / 10.0),
            min_distance_m=float(min_distance_m),
        )

    def to_dict(self) -> dict:
        return {
            "frequency_hz": self.frequency_hz,
            "gain_tx": self.gain_tx,
            "gain_rx": self.gain_rx,
            "min_distance_m": self.min_distance_m,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PropagationConfig":
        known = {"frequency_hz", "gain_tx", "gain_rx", "min_distance_m"}
        return cls(**{k: float(v) for k, v in d.items() if k in known})


def fspl_gain(config: PropagationConfig, distance_m):
    """Linear free-space gain ``Gt * Gr * (lambda / (4 pi d))**2``.

    Accepts scalars or arrays. Distances below ``config.min_distance_m`` are
    clamped; non-positive distances are rejected.
    """
    d = np.asarray(distance_m, dtype=float)
    if np.any(~(d > 0)):
        raise DomainError("distance must be strictly positive")
    d = np.maximum(d, config.min_distance_m)
    g = config.gain_tx * config.gain_rx * (config.wavelength / (4.0 * np.pi * d)) ** 2
    return g if g.ndim else float(g)


def path_loss_db(config: PropagationConfig, distance_m):
    """Free-space path loss in dB (positive number)."""
    return -10.0 * np.log10(fspl_gain(config, distance_m))


def dbm_to_watts(value_dbm):
    w = 10.0 ** ((np.asarray(value_dbm, dtype=float) - 30.0) / 10.0)
    return w if w.ndim else float(w)


def watts_to_dbm(value_w):
    w = np.asarray(value_w, dtype=float)
    if np.any(~(w > 0)):
        raise DomainError("power in Watts must be strictly positive for dBm conversion")
    dbm = 10.0 * np.log10(w) + 30.0
    return dbm if dbm.ndim else float(dbm)


def pairwise_distances(points: np.ndarray, sources: np.ndarray) -> np.ndarray:
    """Euclidean distances, ``(M, 3) x (N, 3) -> (M, N)``."""
    diff = np.asarray(points, dtype=float)[:, None, :] - np.asarray(sources, dtype=float)[None, :, :]
    return np.sqrt(np.einsum("mnk,mnk->mn", diff, diff))


@dataclass(frozen=True, eq=False)
class SensingMatrix:
    """``M x N`` matrix of linear gains from each voxel to each sample point."""

    values: np.ndarray
    column_norms: np.ndarray
    grid: VoxelGrid
    config: PropagationConfig
    points: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def column(self, j: int) -> np.ndarray:
        return self.values[:, j]


def build_sensing_matrix(config: PropagationConfig, grid: VoxelGrid, sample_points,
                         threads: int = 1) -> SensingMatrix:
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 1:
        raise ConfigurationError("sample_points must be a non-empty (M, 3) array")
    if not np.all(np.isfinite(pts)):
        raise ConfigurationError("sample_points must be finite")
    centers = grid.centers()
    blocks = [pts[i:i + _ROW_BLOCK] for i in range(0, len(pts), _ROW_BLOCK)]

    def _block(block):
        # exact coincidence (d == 0) falls under the near-field clamp here
        d = np.maximum(pairwise_distances(block, centers), config.min_distance_m)
        if config.min_distance_m == 0:
            d = np.where(d > 0, d, np.finfo(float).tiny)
        return fspl_gain(config, d)

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_block, blocks))
    else:
        rows = [_block(b) for b in blocks]
    values = np.ascontiguousarray(np.vstack(rows))
    values.setflags(write=False)
    norms = np.sqrt(np.einsum("mn,mn->n", values, values))
    norms.setflags(write=False)
    return SensingMatrix(values=values, column_norms=norms, grid=grid, config=config, points=pts)
