"""Velocity cube: per-voxel radial velocity from the Doppler argmax.

Collapsing the Doppler axis of a thresholded radar cube leaves one radial
velocity per spatial voxel plus a validity mask. Points are looked up through
an axis-aligned context window around their nearest bin; the strongest mover
(largest |velocity|) among the valid voxels in the window wins.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cube import RadarConfig, RadarCube, doppler_bin_velocities


@dataclass
class VelocityCube:
    """Radial velocity per (range, azimuth, elevation) voxel."""

    velocity: np.ndarray   # (n_range, n_az, n_el) float64, m/s
    valid: np.ndarray      # same shape, bool
    config: RadarConfig

    def __post_init__(self) -> None:
        self.velocity = np.asarray(self.velocity, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.velocity.ndim != 3:
            raise ValueError(f"velocity cube must have 3 axes, got {self.velocity.shape}")
        if self.valid.shape != self.velocity.shape:
            raise ValueError(
                f"valid mask shape {self.valid.shape} != velocity shape {self.velocity.shape}"
            )
        if np.any(self.velocity[~self.valid] != 0):
            raise ValueError("invalid voxels must carry zero velocity")
        if self.valid.any() and np.abs(self.velocity[self.valid]).max() > self.config.max_speed:
            raise ValueError("voxel velocity exceeds the unambiguous interval")


@dataclass
class ContextWindow:
    """Bin extents of the search window around a queried point."""

    azimuth_extent: int = 10
    elevation_extent: int = 10
    range_extent: int = 20

    def __post_init__(self) -> None:
        for name in ("azimuth_extent", "elevation_extent", "range_extent"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")


def collapse_doppler(cube: RadarCube, cfg: RadarConfig) -> VelocityCube:
    """Pick the strongest Doppler bin per spatial voxel.

    Exact magnitude ties go to the bin of smallest |velocity|, then to the
    lower bin index. Voxels whose Doppler magnitudes are all zero are invalid
    and carry velocity 0.
    """
    mag = cube.magnitudes
    expected = (cfg.n_range_bins, cfg.n_azimuth_bins, cfg.n_elevation_bins, cfg.n_chirps)
    if mag.shape != expected:
        raise ValueError(f"cube shape {mag.shape} does not match config {expected}")
    vels = doppler_bin_velocities(cfg)
    # Reorder Doppler bins by tie-break priority so the first argmax hit wins.
    order = np.lexsort((np.arange(cfg.n_chirps), np.abs(vels)))
    best = np.argmax(mag[..., order], axis=-1)
    velocity = vels[order[best]]
    valid = mag.max(axis=-1) > 0
    velocity = np.where(valid, velocity, 0.0)
    return VelocityCube(velocity, valid, cfg)


def cartesian_to_polar(point: np.ndarray) -> tuple[float, float, float]:
    """(x, y, z) in the radar frame -> (range m, azimuth rad, elevation rad).

    x points forward, y left, z up; azimuth = atan2(y, x), elevation is the
    angle above the xy plane.
    """
    x, y, z = np.asarray(point, dtype=np.float64)
    rng = float(np.sqrt(x * x + y * y + z * z))
    if rng == 0.0:
        raise ValueError("zero-range point has no direction")
    az = float(np.arctan2(y, x))
    el = float(np.arcsin(np.clip(z / rng, -1.0, 1.0)))
    return rng, az, el


def point_bins(point: np.ndarray, cfg: RadarConfig) -> tuple[int, int, int] | None:
    """Nearest (range, azimuth, elevation) bin of a point, or None if the
    point lies outside the cube coverage (max range or angular FoV)."""
    rng, az, el = cartesian_to_polar(point)
    if rng > cfg.max_range or abs(az) > cfg.azimuth_fov / 2 or abs(el) > cfg.elevation_fov / 2:
        return None
    rb = int(np.clip(round(rng / cfg.range_resolution), 0, cfg.n_range_bins - 1))
    ab = int(np.clip(cfg.n_azimuth_bins // 2 + round(az / cfg.azimuth_bin_width),
                     0, cfg.n_azimuth_bins - 1))
    eb = int(np.clip(cfg.n_elevation_bins // 2 + round(el / cfg.elevation_bin_width),
                     0, cfg.n_elevation_bins - 1))
    return rb, ab, eb


def _window_slice(center: int, extent: int, count: int) -> slice:
    # Floor split: an even extent places the extra bin below the center.
    lo = max(center - extent // 2, 0)
    hi = min(center + (extent - 1 - extent // 2), count - 1)
    return slice(lo, hi + 1)


def query_radial_velocity(
    vc: VelocityCube, point: np.ndarray, window: ContextWindow
) -> tuple[float, bool]:
    """Largest-|velocity| valid voxel inside the context window around a point.

    Returns (velocity, found). found is False when the point lies outside the
    cube coverage or the window holds no valid voxel. |velocity| ties prefer
    the positive sign, then the lexicographically first (range, az, el) bin.
    Window edges are clamped to the cube, never wrapped.
    """
    point = np.asarray(point, dtype=np.float64)
    if float(np.linalg.norm(point)) == 0.0:
        return 0.0, False
    cfg = vc.config
    bins = point_bins(point, cfg)
    if bins is None:
        return 0.0, False
    rb, ab, eb = bins
    sl = (
        _window_slice(rb, window.range_extent, cfg.n_range_bins),
        _window_slice(ab, window.azimuth_extent, cfg.n_azimuth_bins),
        _window_slice(eb, window.elevation_extent, cfg.n_elevation_bins),
    )
    vel = vc.velocity[sl]
    valid = vc.valid[sl]
    if not valid.any():
        return 0.0, False
    speed = np.where(valid, np.abs(vel), -1.0)
    top = speed.max()
    cand = valid & (speed == top)
    positive = cand & (vel > 0)
    if positive.any():
        cand = positive
    idx = tuple(np.argwhere(cand)[0])  # argwhere rows come out lexicographically
    return float(vel[idx]), True


def window_coverage(cfg: RadarConfig, window: ContextWindow) -> tuple[float, float, float]:
    """Physical span of a context window: (azimuth rad, elevation rad, range m)."""
    return (
        window.azimuth_extent * cfg.azimuth_bin_width,
        window.elevation_extent * cfg.elevation_bin_width,
        window.range_extent * cfg.range_resolution,
    )
