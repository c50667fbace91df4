"""Measurement sets: CSV ingestion, altitude splits and a synthetic scene
generator used as ground truth in tests."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, EmptyDatasetError, SchemaError
from .grid import VoxelGrid
from .propagation import PropagationConfig, dbm_to_watts, fspl_gain, pairwise_distances, watts_to_dbm

DEFAULT_COLUMNS = ("x", "y", "z", "rsrp_dbm")
# Additive-noise samples are floored here before conversion to dBm (-170 dBm).
POWER_FLOOR_W = 1e-20


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """``M`` sample locations with RSS in both dBm and Watts."""

    points: np.ndarray
    rsrp_dbm: np.ndarray
    rss_w: np.ndarray = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        dbm = np.asarray(self.rsrp_dbm, dtype=float).reshape(-1)
        if pts.shape[0] == 0 or dbm.size == 0:
            raise EmptyDatasetError("measurement set is empty")
        if pts.shape != (dbm.size, 3):
            raise SchemaError(f"points {pts.shape} do not match {dbm.size} RSS values")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(dbm))):
            raise SchemaError("measurement values must be finite")
        if self.rss_w is None:
            w = dbm_to_watts(dbm)
        else:
            w = np.asarray(self.rss_w, dtype=float).reshape(-1)
            if not np.allclose(w, dbm_to_watts(dbm), rtol=1e-12, atol=0):
                raise SchemaError("rss_w is inconsistent with rsrp_dbm")
        for a in (pts, dbm, w):
            a.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "rsrp_dbm", dbm)
        object.__setattr__(self, "rss_w", np.atleast_1d(w))

    @classmethod
    def from_watts(cls, points, rss_w, metadata=None) -> "MeasurementSet":
        w = np.asarray(rss_w, dtype=float)
        return cls(points, watts_to_dbm(w), w, dict(metadata or {}))

    def __len__(self) -> int:
        return self.rsrp_dbm.size

    @property
    def altitudes(self) -> np.ndarray:
        return self.points[:, 2]

    def subset(self, mask, **metadata) -> "MeasurementSet":
        meta = dict(self.metadata)
        meta.update(metadata)
        return MeasurementSet(self.points[mask], self.rsrp_dbm[mask], self.rss_w[mask], meta)


def concatenate(sets) -> MeasurementSet:
    sets = list(sets)
    if not sets:
        raise EmptyDatasetError("nothing to concatenate")
    return MeasurementSet(
        np.vstack([s.points for s in sets]),
        np.concatenate([s.rsrp_dbm for s in sets]),
        np.concatenate([s.rss_w for s in sets]),
        dict(sets[0].metadata),
    )


def _parse_float(text):
    try:
        v = float(text)
    except (TypeError, ValueError):
        return None
    return v if math.isfinite(v) else None


def load_measurements_csv(path, columns=DEFAULT_COLUMNS) -> MeasurementSet:
    """Read ``x, y, z`` (m) and RSRP (dBm) columns from a headed CSV.

    ``columns`` names the four source columns in that order. Rows with a
    missing, unparsable or non-finite value are dropped; the count is kept in
    ``metadata["dropped_rows"]``.
    """
    path = Path(path)
    columns = tuple(columns)
    if len(columns) != 4:
        raise ConfigurationError("column mapping needs exactly four names (x, y, z, rsrp)")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames:
            raise EmptyDatasetError(f"{path}: empty file")
        header = [h.strip() for h in reader.fieldnames]
        missing = [c for c in columns if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        reader.fieldnames = header
        rows, dropped = [], 0
        for rec in reader:
            vals = [_parse_float(rec.get(c)) for c in columns]
            if any(v is None for v in vals):
                dropped += 1
                continue
            rows.append(vals)
    if not rows:
        raise EmptyDatasetError(f"{path}: no valid measurement rows ({dropped} dropped)")
    arr = np.asarray(rows, dtype=float)
    return MeasurementSet(arr[:, :3], arr[:, 3], metadata={"source": str(path), "dropped_rows": dropped})


def save_measurements_csv(ms: MeasurementSet, path, columns=DEFAULT_COLUMNS) -> None:
    """Write with ``repr`` floats so a reload reproduces every value.

    ``path`` may also be an open text stream.
    """
    if hasattr(path, "write"):
        _write_measurements(path, ms, columns)
        return
    with Path(path).open("w", newline="") as fh:
        _write_measurements(fh, ms, columns)


def _write_measurements(fh, ms, columns):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(columns)
    for p, v in zip(ms.points, ms.rsrp_dbm):
        w.writerow([repr(float(p[0])), repr(float(p[1])), repr(float(p[2])), repr(float(v))])


def filter_by_altitude(ms: MeasurementSet, z_values, tolerance_m: float = 1.0) -> MeasurementSet:
    """Keep samples whose altitude is within ``tolerance_m`` of any listed value."""
    if not tolerance_m >= 0:
        raise ConfigurationError("altitude tolerance must be non-negative")
    z_values = [float(z) for z in z_values]
    z = ms.points[:, 2]
    keep = np.zeros(len(ms), dtype=bool)
    for zv in z_values:
        keep |= np.abs(z - zv) <= tolerance_m
    if not keep.any():
        raise EmptyDatasetError(f"no samples within {tolerance_m} m of altitudes {z_values}")
    return ms.subset(keep, altitudes=z_values)


def distinct_altitudes(ms: MeasurementSet, tolerance_m: float = 1.0) -> list[float]:
    """Cluster sample altitudes; returns the cluster means in ascending order."""
    zs = np.sort(ms.points[:, 2])
    groups = [[zs[0]]]
    for z in zs[1:]:
        if z - groups[-1][-1] <= tolerance_m:
            groups[-1].append(z)
        else:
            groups.append([z])
    return [float(np.mean(g)) for g in groups]


# -- synthetic scenes -------------------------------------------------------

@dataclass(frozen=True)
class SyntheticScene:
    """Ground-truth emitters plus a noise model.

    ``true_sources`` holds ``(location, power_w)`` pairs where ``location`` is
    a voxel index or an explicit ``(x, y, z)`` point. ``path_loss_exponent``
    other than 2 generates data off the free-space model (deliberate
    mismatch); ``noise_mode`` is ``"lognormal"`` (dB shadowing with std
    ``noise_sigma_db``) or ``"awgn"`` (additive Watts with std
    ``noise_sigma_w``).
    """

    grid: VoxelGrid
    true_sources: tuple
    propagation: PropagationConfig = PropagationConfig()
    noise_sigma_db: float = 0.0
    seed: int = 0
    path_loss_exponent: float = 2.0
    noise_mode: str = "lognormal"
    noise_sigma_w: float = 0.0

    def __post_init__(self):
        srcs = tuple((int(loc) if isinstance(loc, (int, np.integer)) else tuple(float(v) for v in loc), float(p))
                     for loc, p in self.true_sources)
        if not srcs:
            raise ConfigurationError("scene needs at least one true source")
        if any(not p > 0 for _, p in srcs):
            raise ConfigurationError("true source powers must be positive")
        if self.noise_mode not in ("lognormal", "awgn"):
            raise ConfigurationError(f"unknown noise mode {self.noise_mode!r}")
        if self.noise_sigma_db < 0 or self.noise_sigma_w < 0:
            raise ConfigurationError("noise levels must be non-negative")
        object.__setattr__(self, "true_sources", srcs)

    @property
    def source_positions(self) -> np.ndarray:
        return np.array([self.grid.voxel_center(loc) if isinstance(loc, int) else loc
                         for loc, _ in self.true_sources], dtype=float)

    @property
    def source_powers(self) -> np.ndarray:
        return np.array([p for _, p in self.true_sources])

    def with_seed(self, seed: int) -> "SyntheticScene":
        return SyntheticScene(self.grid, self.true_sources, self.propagation, self.noise_sigma_db,
                              int(seed), self.path_loss_exponent, self.noise_mode, self.noise_sigma_w)

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticScene":
        try:
            grid = VoxelGrid.from_dict(d["grid"])
            prop = d.get("propagation", {})
            if "gain_tx_dbi" in prop or "gain_rx_dbi" in prop:
                propagation = PropagationConfig.from_dbi(
                    prop.get("frequency_hz", 3.5e9), prop.get("gain_tx_dbi", 0.0), prop.get("gain_rx_dbi", 0.0))
            else:
                propagation = PropagationConfig.from_dict(prop)
            sources = []
            for s in d["true_sources"]:
                loc = int(s["index"]) if "index" in s else tuple(s["xyz"])
                power = dbm_to_watts(s["power_dbm"]) if "power_dbm" in s else float(s["power_w"])
                sources.append((loc, power))
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"malformed scene: {exc}") from exc
        return cls(
            grid=grid,
            true_sources=tuple(sources),
            propagation=propagation,
            noise_sigma_db=float(d.get("noise_sigma_db", 0.0)),
            seed=int(d.get("seed", 0)),
            path_loss_exponent=float(d.get("path_loss_exponent", 2.0)),
            noise_mode=d.get("noise_mode", "lognormal"),
            noise_sigma_w=float(d.get("noise_sigma_w", 0.0)),
        )

    @classmethod
    def from_json(cls, path) -> "SyntheticScene":
        return cls.from_dict(json.loads(Path(path).read_text()))


def scene_gains(scene: SyntheticScene, points) -> np.ndarray:
    """``(M, K)`` gains from each true source, honouring the scene exponent."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    cfg = scene.propagation
    d = np.maximum(pairwise_distances(pts, scene.source_positions), max(cfg.min_distance_m, 1e-300))
    g = fspl_gain(cfg, d)
    if scene.path_loss_exponent != 2.0:
        # log-distance law anchored to free space at 1 m
        g = g * d ** (2.0 - scene.path_loss_exponent)
    return g


def generate_synthetic(scene: SyntheticScene, sample_points) -> MeasurementSet:
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    g = scene_gains(scene, pts)
    w = np.zeros(pts.shape[0])
    for j, p in enumerate(scene.source_powers):
        w = w + g[:, j] * p
    rng = np.random.default_rng(scene.seed)
    if scene.noise_mode == "lognormal":
        if scene.noise_sigma_db > 0:
            w = w * 10.0 ** (rng.normal(0.0, scene.noise_sigma_db, size=w.shape) / 10.0)
    elif scene.noise_sigma_w > 0:
        w = np.maximum(w + rng.normal(0.0, scene.noise_sigma_w, size=w.shape), POWER_FLOOR_W)
    return MeasurementSet.from_watts(pts, w, {"synthetic": True, "seed": scene.seed})


def zigzag_points(x_range, y_range, altitude: float, n_legs: int = 6, points_per_leg: int = 40) -> np.ndarray:
    """Back-and-forth survey track at one altitude.

    Legs run along x, alternating direction, evenly spaced across ``y_range``.
    """
    if n_legs < 1 or points_per_leg < 1:
        raise ConfigurationError("zigzag needs at least one leg and one point per leg")
    xs = np.linspace(x_range[0], x_range[1], points_per_leg)
    ys = np.linspace(y_range[0], y_range[1], n_legs) if n_legs > 1 else np.array([0.5 * (y_range[0] + y_range[1])])
    legs = []
    for k, yv in enumerate(ys):
        x = xs if k % 2 == 0 else xs[::-1]
        legs.append(np.column_stack([x, np.full_like(x, yv), np.full_like(x, float(altitude))]))
    return np.vstack(legs)


def survey_points(x_range, y_range, altitudes, n_legs: int = 6, points_per_leg: int = 40) -> np.ndarray:
    """Zigzag tracks stacked over several altitudes."""
    return np.vstack([zigzag_points(x_range, y_range, z, n_legs, points_per_leg) for z in altitudes])


def random_points(bounds_lo, bounds_hi, n: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    lo, hi = np.asarray(bounds_lo, dtype=float), np.asarray(bounds_hi, dtype=float)
    return lo + rng.random((n, 3)) * (hi - lo)
