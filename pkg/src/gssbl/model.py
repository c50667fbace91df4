"""Sparse virtual-source model shared by GS-SBL and the baselines."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrityError
from .grid import VoxelGrid
from .propagation import PropagationConfig, fspl_gain, pairwise_distances

ALGORITHMS = ("gs_sbl", "omp", "fspl")
# OMP powers come from an unconstrained least-squares solve and may be negative.
_POSITIVE_POWERS = {"gs_sbl", "fspl"}


@dataclass(frozen=True, eq=False)
class SparseModel:
    """Selected voxels, their powers (W) and the global scale ``rho``.

    ``support`` holds voxel indices in selection order; a source that is not a
    grid voxel (the FSPL baseline's base station) has index ``None``.
    """

    algorithm: str
    support: tuple
    positions: np.ndarray
    powers: np.ndarray
    rho: float
    n_sources_requested: int
    propagation: PropagationConfig
    grid: VoxelGrid | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        pw = np.asarray(self.powers, dtype=float).reshape(-1)
        pos.setflags(write=False)
        pw.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "powers", pw)
        object.__setattr__(self, "support", tuple(None if s is None else int(s) for s in self.support))
        object.__setattr__(self, "rho", float(self.rho))
        self.validate()

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise IntegrityError(f"unknown algorithm tag {self.algorithm!r}")
        k = len(self.support)
        if self.positions.shape[0] != k or self.powers.shape[0] != k:
            raise IntegrityError("support, positions and powers must have equal length")
        idx = [s for s in self.support if s is not None]
        if len(set(idx)) != len(idx):
            raise IntegrityError("support contains duplicate voxel indices")
        if not 0 < self.rho <= 1:
            raise IntegrityError(f"rho must lie in (0, 1], got {self.rho}")
        if self.n_sources_requested < k:
            raise IntegrityError("support is larger than the requested number of sources")
        if self.grid is not None:
            if self.n_sources_requested > self.grid.n_voxels:
                raise IntegrityError("requested more sources than grid voxels")
            for s, p in zip(self.support, self.positions):
                if s is None:
                    continue
                if not 0 <= s < self.grid.n_voxels:
                    raise IntegrityError(f"voxel index {s} outside grid")
                if not np.allclose(self.grid.voxel_center(s), p, rtol=0, atol=1e-9):
                    raise IntegrityError(f"position of voxel {s} does not match its centre")
        elif any(s is not None for s in self.support):
            raise IntegrityError("voxel indices given without a grid")
        if not np.all(np.isfinite(self.positions)) or not np.all(np.isfinite(self.powers)):
            raise IntegrityError("positions and powers must be finite")
        if self.algorithm in _POSITIVE_POWERS:
            if np.any(self.powers <= 0):
                raise IntegrityError(f"{self.algorithm} powers must be strictly positive")
        elif np.any(self.powers == 0):
            raise IntegrityError("source powers must be non-zero")

    @property
    def n_sources(self) -> int:
        return len(self.support)

    def gains(self, points) -> np.ndarray:
        """``(M, K)`` gain matrix from each source to each point."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = np.maximum(pairwise_distances(pts, self.positions), self.propagation.min_distance_m)
        if self.propagation.min_distance_m == 0:
            d = np.where(d > 0, d, np.finfo(float).tiny)
        return fspl_gain(self.propagation, d)

    def reconstruct(self, points) -> np.ndarray:
        """Unscaled superposition ``sum_j phi_j p_j`` at ``points`` (W)."""
        g = self.gains(points)
        return superpose(g, self.powers)

    def predict_watts(self, points) -> np.ndarray:
        return self.rho * self.reconstruct(points)


def superpose(columns: np.ndarray, powers) -> np.ndarray:
    """Accumulate ``sum_j columns[:, j] * powers[j]`` in selection order.

    A fixed left-to-right order keeps partial sums bit-identical between the
    fitting loop and later predictions.
    """
    cols = np.asarray(columns, dtype=float)
    out = np.zeros(cols.shape[0])
    for j, p in enumerate(np.asarray(powers, dtype=float)):
        out = out + cols[:, j] * p
    return out
