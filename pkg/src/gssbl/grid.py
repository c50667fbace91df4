"""Voxel grid of candidate virtual-source locations."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

#: Cell size used for the UAV campaign maps (x, y, z in metres).
DEFAULT_CELL_SIZE = (25.0, 25.0, 10.0)


@dataclass(frozen=True)
class VoxelGrid:
    """Regular 3D grid; voxel ``i`` is linearised with x varying fastest.

    ``index = ix + Nx * (iy + Ny * iz)``
    """

    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    cell_size: tuple[float, float, float] = DEFAULT_CELL_SIZE
    counts: tuple[int, int, int] = (1, 1, 1)

    def __post_init__(self):
        origin = tuple(float(v) for v in self.origin)
        cell = tuple(float(v) for v in self.cell_size)
        counts = tuple(self.counts)
        if len(origin) != 3 or len(cell) != 3 or len(counts) != 3:
            raise ConfigurationError("grid origin, cell_size and counts must have 3 entries")
        if not all(np.isfinite(origin)):
            raise ConfigurationError(f"grid origin must be finite, got {origin}")
        if not all(np.isfinite(c) and c > 0 for c in cell):
            raise ConfigurationError(f"cell sizes must be positive, got {cell}")
        if not all(int(c) == c and c >= 1 for c in counts):
            raise ConfigurationError(f"grid counts must be positive integers, got {counts}")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "cell_size", cell)
        object.__setattr__(self, "counts", tuple(int(c) for c in counts))

    @property
    def n_voxels(self) -> int:
        nx, ny, nz = self.counts
        return nx * ny * nz

    def __len__(self) -> int:
        return self.n_voxels

    @property
    def upper(self) -> np.ndarray:
        """Far corner of the bounding box."""
        return np.asarray(self.origin) + np.asarray(self.cell_size) * np.asarray(self.counts)

    def index_of(self, ix: int, iy: int, iz: int) -> int:
        nx, ny, nz = self.counts
        for name, v, n in (("ix", ix, nx), ("iy", iy, ny), ("iz", iz, nz)):
            if not 0 <= v < n:
                raise IndexError(f"{name}={v} outside [0, {n})")
        return int(ix + nx * (iy + ny * iz))

    def coords_of(self, index: int) -> tuple[int, int, int]:
        if not 0 <= index < self.n_voxels:
            raise IndexError(f"voxel index {index} outside [0, {self.n_voxels})")
        nx, ny, _ = self.counts
        ix = index % nx
        iy = (index // nx) % ny
        iz = index // (nx * ny)
        return int(ix), int(iy), int(iz)

    def voxel_center(self, index: int) -> np.ndarray:
        ijk = np.asarray(self.coords_of(index), dtype=float)
        return np.asarray(self.origin) + (ijk + 0.5) * np.asarray(self.cell_size)

    def centers(self) -> np.ndarray:
        """All voxel centres as an ``(N, 3)`` array in index order."""
        nx, ny, nz = self.counts
        iz, iy, ix = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
        ijk = np.stack([ix.ravel(), iy.ravel(), iz.ravel()], axis=1).astype(float)
        return np.asarray(self.origin) + (ijk + 0.5) * np.asarray(self.cell_size)

    def to_dict(self) -> dict:
        return {
            "origin": list(self.origin),
            "cell_size": list(self.cell_size),
            "counts": list(self.counts),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VoxelGrid":
        try:
            return cls(
                origin=tuple(d.get("origin", (0.0, 0.0, 0.0))),
                cell_size=tuple(d.get("cell_size", DEFAULT_CELL_SIZE)),
                counts=tuple(d["counts"]),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"malformed grid specification: {exc}") from exc


def voxel_center(grid: VoxelGrid, index: int) -> np.ndarray:
    return grid.voxel_center(index)


def index_of(grid: VoxelGrid, ix: int, iy: int, iz: int) -> int:
    return grid.index_of(ix, iy, iz)
