"""Fractal transform maps: prism surface-area dimension and Hoelder fields.

Three per-voxel maps are produced and then fed back through the
conventional texture families:

* ``ptpsa``: per axial slice, triangulated prism surface area A(s) over the
  voxel's window at several cell scales; local FD = 2 - slope of
  log A vs log s, clamped to [2, 3].
* ``mbm``: local Hurst exponent from the scaling of windowed mean absolute
  increments E|I(v+s) - I(v)| ~ s^H over 3-D axis lags, clamped to [0, 1].
* ``gmbm``: pointwise Hoelder exponent from the oscillation (max - min over
  the radius-r cube) scaling osc_r ~ r^H, clamped to [0, 1].

All maps are shift invariant (heights, increments and oscillations are
relative) and deterministic for any evaluation order: each output voxel
depends only on its own window.  Windows are clamped to the grid; mean
increments use the partial in-grid neighborhood.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .io import RegionMask, StudyConfig, VoxelGrid
from .texture import (GLZSM_FEATURES, GTSDM_FEATURES, HISTOGRAM_FEATURES,
                      NGTDM_FEATURES, REGION_TOKENS, glzsm_features,
                      gtsdm_features, histogram_features, ngtdm_features,
                      quantize)

MAP_KINDS = ("ptpsa", "mBm", "GmBm")


@dataclass(frozen=True)
class FractalMap:
    """Per-voxel fractal dimension or Hoelder exponent field."""

    values: np.ndarray
    kind: str
    spacing: tuple[float, float, float]
    degenerate: np.ndarray  # True where the fallback convention applied

    def as_grid(self) -> VoxelGrid:
        return VoxelGrid(self.values, self.spacing)


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares fit of log measure against log scale."""

    log_scales: np.ndarray
    log_measures: np.ndarray
    slope: float
    r_squared: float


def fit_log_log(scales, measures) -> ScalingFit:
    """Fit log(measure) = a + slope*log(scale); needs >= 3 positive scales."""
    scales = np.asarray(scales, dtype=np.float64)
    measures = np.asarray(measures, dtype=np.float64)
    if len(scales) < 3:
        raise ValueError("need at least 3 scale points")
    if np.any(np.diff(scales) <= 0):
        raise ValueError("scales must be strictly increasing")
    if np.any(measures <= 0):
        raise ValueError("measures must be positive")
    lx, ly = np.log(scales), np.log(measures)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (intercept + slope * lx)
    sst = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 if sst == 0 else 1.0 - float((resid ** 2).sum()) / sst
    return ScalingFit(lx, ly, float(slope), r2)


def _check_args(window, scales):
    window = int(window)
    if window < 5 or window % 2 == 0:
        raise ValueError("window must be an odd integer >= 5")
    scales = tuple(int(s) for s in scales)
    if len(scales) < 3:
        raise ValueError("need at least 3 scales for the log-log regression")
    if any(s < 1 for s in scales) or any(b <= a for a, b in zip(scales, scales[1:])):
        raise ValueError("scales must be strictly increasing positive integers")
    return window, scales


def _loglog_slope_maps(log_s, log_measures):
    """Per-voxel least-squares slope across stacked log-measure maps."""
    log_s = log_s - log_s.mean()
    denom = float((log_s ** 2).sum())
    stack = np.stack(log_measures)
    mean = stack.mean(axis=0)
    return np.tensordot(log_s, stack - mean, axes=(0, 0)) / denom


# ---------------------------------------------------------------------------
# PTPSA

def _prism_cell_areas(sl: np.ndarray, s: int) -> np.ndarray:
    """Triangulated surface area of every s-cell anchored in a 2-D slice.

    A cell has corner heights z00,z10,z01,z11 over an s x s base and a
    center vertex at the corner mean; the area is the sum of the four
    triangles around the center.
    """
    z00 = sl[:-s, :-s]
    z10 = sl[s:, :-s]
    z01 = sl[:-s, s:]
    z11 = sl[s:, s:]
    zc = 0.25 * (z00 + z10 + z01 + z11)
    h = s / 2.0

    # cross product of the two edge vectors from a shared corner
    def area(ax, ay, az, bx, by, bz):
        nx = ay * bz - az * by
        ny = az * bx - ax * bz
        nz = ax * by - ay * bx
        return 0.5 * np.sqrt(nx * nx + ny * ny + nz * nz)

    total = (
        area(s, 0.0, z10 - z00, h, h, zc - z00)      # bottom edge
        + area(0.0, s, z01 - z00, h, h, zc - z00)    # left edge
        + area(-s, 0.0, z01 - z11, -h, -h, zc - z11)  # top edge
        + area(0.0, -s, z10 - z11, -h, -h, zc - z11)  # right edge
    )
    return total


def ptpsa_map(grid: VoxelGrid, window: int = 11, scales=(1, 2, 4)) -> FractalMap:
    """Piecewise triangular prism surface-area fractal dimension, slice-wise.

    At scale s the window is tiled with floor((window-1)/s) cells anchored
    at the window corner; the summed triangle area is rescaled to the full
    window footprint so that flat and planar surfaces give A(s) constant in
    s and hence FD exactly 2.
    """
    window, scales = _check_args(window, scales)
    nx, ny, nz = grid.dims
    if nx < window or ny < window:
        raise ValueError(f"window {window} exceeds slice dims ({nx}, {ny})")
    usable = [s for s in scales if (window - 1) // s >= 1]
    if len(usable) < 3:
        raise ValueError(f"fewer than 3 usable scales for window {window}: {usable}")
    half = window // 2
    out = np.empty(grid.dims)
    ax_anchor = np.clip(np.arange(nx) - half, 0, nx - window)
    ay_anchor = np.clip(np.arange(ny) - half, 0, ny - window)
    for z in range(nz):
        sl = grid.data[:, :, z]
        log_measures = []
        for s in usable:
            ncells = (window - 1) // s
            cell = _prism_cell_areas(sl, s)
            win = np.zeros((nx - window + 1, ny - window + 1))
            for i in range(ncells):
                for j in range(ncells):
                    win += cell[i * s: i * s + win.shape[0],
                                j * s: j * s + win.shape[1]]
            rescale = ((window - 1) / (ncells * s)) ** 2
            log_measures.append(np.log(win[np.ix_(ax_anchor, ay_anchor)] * rescale))
        slope = _loglog_slope_maps(np.log(np.array(usable, dtype=float)), log_measures)
        out[:, :, z] = 2.0 - slope
    np.clip(out, 2.0, 3.0, out=out)
    degenerate = np.zeros(grid.dims, dtype=bool)
    return FractalMap(out, "ptpsa", grid.spacing, degenerate)


# ---------------------------------------------------------------------------
# mBm

def _box_sum(arr: np.ndarray, half: int) -> np.ndarray:
    """Sum of `arr` over the window of half-width `half` clamped to the grid."""
    out = arr
    for axis in range(arr.ndim):
        c = np.concatenate([np.zeros_like(out.take([0], axis=axis)),
                            np.cumsum(out, axis=axis)], axis=axis)
        n = arr.shape[axis]
        hi = np.minimum(np.arange(n) + half + 1, n)
        lo = np.maximum(np.arange(n) - half, 0)
        out = c.take(hi, axis=axis) - c.take(lo, axis=axis)
    return out


def mbm_map(grid: VoxelGrid, window: int = 11, scales=(1, 2, 4)) -> FractalMap:
    """Local Hurst exponent from windowed mean absolute axis increments.

    Zero-variance windows have no increment signal; there H is defined as
    1.0 (smooth) and flagged.
    """
    window, scales = _check_args(window, scales)
    if max(scales) >= max(grid.dims):
        raise ValueError(f"largest scale {max(scales)} exceeds grid dims {grid.dims}")
    half = window // 2
    data = grid.data
    log_means = []
    degenerate = np.zeros(grid.dims, dtype=bool)
    for s in scales:
        total = np.zeros(grid.dims)
        count = np.zeros(grid.dims)
        for axis in range(3):
            if data.shape[axis] <= s:
                continue
            src = [slice(None)] * 3
            dst = [slice(None)] * 3
            src[axis] = slice(0, data.shape[axis] - s)
            dst[axis] = slice(s, None)
            diff = np.zeros(grid.dims)
            diff[tuple(src)] = np.abs(data[tuple(dst)] - data[tuple(src)])
            valid = np.zeros(grid.dims)
            valid[tuple(src)] = 1.0
            total += _box_sum(diff, half)
            count += _box_sum(valid, half)
        if not count.any():
            raise ValueError(f"no valid increments at scale {s}")
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = total / count
        mean[count == 0] = 0.0
        degenerate |= mean <= 0
        log_means.append(mean)
    floor = np.finfo(float).tiny
    log_means = [np.log(np.maximum(m, floor)) for m in log_means]
    slope = _loglog_slope_maps(np.log(np.array(scales, dtype=float)), log_means)
    out = np.clip(slope, 0.0, 1.0)
    out[degenerate] = 1.0
    return FractalMap(out, "mBm", grid.spacing, degenerate)


# ---------------------------------------------------------------------------
# GmBm

def gmbm_map(grid: VoxelGrid, scales=(1, 2, 4)) -> FractalMap:
    """Pointwise Hoelder exponent from oscillation over radius-r cubes.

    osc_r(v) = max - min of the intensity over the L-inf ball of radius r
    clamped to the grid; H(v) is the log osc / log r regression slope.
    Voxels whose oscillation vanishes at any radius are defined smooth
    (H = 1) and flagged.
    """
    scales = tuple(int(s) for s in scales)
    if len(scales) < 3:
        raise ValueError("need at least 3 scales for the log-log regression")
    if any(s < 1 for s in scales) or any(b <= a for a, b in zip(scales, scales[1:])):
        raise ValueError("scales must be strictly increasing positive integers")
    data = grid.data
    degenerate = np.zeros(grid.dims, dtype=bool)
    log_oscs = []
    for r in scales:
        size = 2 * r + 1
        osc = (ndimage.maximum_filter(data, size=size, mode="nearest")
               - ndimage.minimum_filter(data, size=size, mode="nearest"))
        degenerate |= osc <= 0
        log_oscs.append(osc)
    floor = np.finfo(float).tiny
    log_oscs = [np.log(np.maximum(o, floor)) for o in log_oscs]
    slope = _loglog_slope_maps(np.log(np.array(scales, dtype=float)), log_oscs)
    out = np.clip(slope, 0.0, 1.0)
    out[degenerate] = 1.0
    return FractalMap(out, "GmBm", grid.spacing, degenerate)


# ---------------------------------------------------------------------------
# Full fractal row

def compute_maps(grid: VoxelGrid, config: StudyConfig | None = None):
    """The three fractal maps for one grid, keyed by kind."""
    config = config or StudyConfig()
    return {
        "ptpsa": ptpsa_map(grid, config.window, config.scales),
        "mBm": mbm_map(grid, config.window, config.scales),
        "GmBm": gmbm_map(grid, config.scales),
    }


def fractal_feature_names(config: StudyConfig) -> list[str]:
    """Name list for one extract_fractal row.

    Whole-tumor features omit the region token (matching the published
    naming style); sub-region features carry it.
    """
    names = []
    n_off = len(config.offsets)
    for kind in MAP_KINDS:
        for token, _ in REGION_TOKENS:
            prefix = f"T1C_{kind}" if token == "WT" else f"T1C_{kind}_{token}"
            for k in range(1, n_off + 1):
                names += [f"{prefix}_GTSDM_{f}_d{k}" for f in GTSDM_FEATURES]
            names += [f"{prefix}_NGTDM_{f}" for f in NGTDM_FEATURES]
            names += [f"{prefix}_GLZSM_{f}" for f in GLZSM_FEATURES]
            names += [f"{prefix}_Histogram_{f}" for f in HISTOGRAM_FEATURES]
    return names


def extract_fractal(grid: VoxelGrid, mask: RegionMask,
                    config: StudyConfig | None = None,
                    maps=None) -> dict[str, float]:
    """Conventional texture families applied to each fractal map x region."""
    config = config or StudyConfig()
    if mask.dims != grid.dims:
        raise ValueError(f"mask dims {mask.dims} do not match grid dims {grid.dims}")
    maps = maps or compute_maps(grid, config)
    row = {name: np.nan for name in fractal_feature_names(config)}
    for kind in MAP_KINDS:
        map_grid = maps[kind].as_grid()
        for token, label in REGION_TOKENS:
            if not mask.region(label).any():
                continue
            prefix = f"T1C_{kind}" if token == "WT" else f"T1C_{kind}_{token}"
            q = quantize(map_grid, mask, label, config.levels)
            for k, offset in enumerate(config.offsets, start=1):
                try:
                    feats = gtsdm_features(q, offset)
                except ValueError:
                    feats = {f: np.nan for f in GTSDM_FEATURES}
                for f, v in feats.items():
                    row[f"{prefix}_GTSDM_{f}_d{k}"] = v
            for f, v in ngtdm_features(q).items():
                row[f"{prefix}_NGTDM_{f}"] = v
            for f, v in glzsm_features(q).items():
                row[f"{prefix}_GLZSM_{f}"] = v
            hist = histogram_features(map_grid, mask, label, config.levels)
            for f, v in hist.as_dict().items():
                row[f"{prefix}_Histogram_{f}"] = v
    return row
