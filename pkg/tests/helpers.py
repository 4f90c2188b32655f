"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written without np.fft and without reusing
package internals: DFTs are explicit matrix products, searches are plain
loops. Slow but unambiguous.
"""
from __future__ import annotations

import numpy as np

from velofusion.cube import RadarConfig


def hanning_closed_form(n: int) -> np.ndarray:
    i = np.arange(n)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * i / (n - 1)))


def dft_matrix(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n)


def center_shift(x: np.ndarray, axis: int) -> np.ndarray:
    """Move the zero bin of a DFT axis to index n // 2."""
    return np.roll(x, x.shape[axis] // 2, axis=axis)


def dft_cube_oracle(samples: np.ndarray, cfg: RadarConfig) -> np.ndarray:
    """(chirp, sample, az, el) ADC -> (range, az, el, doppler) magnitudes."""
    x = samples.astype(np.complex128)
    x = x * hanning_closed_form(cfg.n_chirps)[:, None, None, None]
    x = x * hanning_closed_form(cfg.n_samples)[None, :, None, None]
    x = np.tensordot(dft_matrix(cfg.n_samples), x, axes=([1], [1]))  # -> (range, chirp, az, el)
    x = x[: cfg.n_range_bins]
    x = np.tensordot(dft_matrix(cfg.n_chirps), x, axes=([1], [1]))   # -> (doppler, range, az, el)
    x = center_shift(x, 0)
    x = np.tensordot(dft_matrix(cfg.n_azimuth_bins), x, axes=([1], [2]))  # -> (az, doppler, range, el)
    x = center_shift(x, 0)
    x = np.tensordot(dft_matrix(cfg.n_elevation_bins), x, axes=([1], [3]))  # -> (el, az, doppler, range)
    x = center_shift(x, 0)
    return np.abs(x).transpose(3, 1, 0, 2)  # -> (range, az, el, doppler)


def brute_collapse(mag: np.ndarray, cfg: RadarConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-voxel Doppler argmax with explicit tie rules, by exhaustive loop."""
    nr, na, ne, nd = mag.shape
    velocity = np.zeros((nr, na, ne))
    valid = np.zeros((nr, na, ne), dtype=bool)
    for r in range(nr):
        for a in range(na):
            for e in range(ne):
                best = None
                for d in range(nd):
                    m = mag[r, a, e, d]
                    v = (d - nd // 2) * cfg.speed_resolution
                    key = (-m, abs(v), d)  # max magnitude, then min |v|, then low bin
                    if best is None or key < best[0]:
                        best = (key, m, v)
                if best[1] > 0:
                    velocity[r, a, e] = best[2]
                    valid[r, a, e] = True
    return velocity, valid


def brute_window_query(
    velocity: np.ndarray,
    valid: np.ndarray,
    cfg: RadarConfig,
    point: np.ndarray,
    extents: tuple[int, int, int],
) -> tuple[float, bool]:
    """Reference context-window lookup: clamped window, max |v|, ties to the
    positive sign then to the first (range, az, el) bin in scan order."""
    x, y, z = point
    rng = float(np.sqrt(x * x + y * y + z * z))
    if rng == 0.0 or rng > cfg.max_range:
        return 0.0, False
    az = float(np.arctan2(y, x))
    el = float(np.arcsin(z / rng))
    if abs(az) > cfg.azimuth_fov / 2 or abs(el) > cfg.elevation_fov / 2:
        return 0.0, False

    def clamp(v: float, n: int) -> int:
        return int(min(max(round(v), 0), n - 1))

    rb = clamp(rng / cfg.range_resolution, cfg.n_range_bins)
    ab = clamp(az / (cfg.azimuth_fov / cfg.n_azimuth_bins) + cfg.n_azimuth_bins // 2,
               cfg.n_azimuth_bins)
    eb = clamp(el / (cfg.elevation_fov / cfg.n_elevation_bins) + cfg.n_elevation_bins // 2,
               cfg.n_elevation_bins)

    ext_az, ext_el, ext_rng = extents
    best = None
    for r in range(max(rb - ext_rng // 2, 0),
                   min(rb + (ext_rng - 1 - ext_rng // 2), cfg.n_range_bins - 1) + 1):
        for a in range(max(ab - ext_az // 2, 0),
                       min(ab + (ext_az - 1 - ext_az // 2), cfg.n_azimuth_bins - 1) + 1):
            for e in range(max(eb - ext_el // 2, 0),
                           min(eb + (ext_el - 1 - ext_el // 2), cfg.n_elevation_bins - 1) + 1):
                if not valid[r, a, e]:
                    continue
                v = velocity[r, a, e]
                if best is None or abs(v) > abs(best) or (abs(v) == abs(best) and v > 0 > best):
                    best = v
    if best is None:
        return 0.0, False
    return float(best), True


def random_rotation(rng: np.random.Generator, max_angle: float = 0.3) -> np.ndarray:
    """Random small rotation via Rodrigues' formula."""
    axis = rng.standard_normal(3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(-max_angle, max_angle)
    k = np.array([
        [0, -axis[2], axis[1]],
        [axis[2], 0, -axis[0]],
        [-axis[1], axis[0], 0],
    ])
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)
