"""Conventional 3-D texture and shape features on masked regions.

Families
--------
GTSDM      symmetric normalized grey-tone co-occurrence at a voxel offset
NGTDM      neighborhood grey-tone difference table (26-neighborhood)
GLZSM      grey-level size-zone matrix over 26-connected constant zones
Histogram  moments of raw intensities, energy/entropy of an L-bin histogram
Shape      volume, principal-axis lengths, eccentricity, orientation, extent

All grey-tone families operate on a min-max quantized region, which makes
every texture feature invariant under positive affine intensity maps.
Feature names follow ``T1C_<region>_<family>_<feature>[_d<k>]`` where the
``_d<k>`` suffix indexes the configured co-occurrence offset table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .io import (EDEMA, ENHANCING, NECROSIS, BRAIN, WHOLE_TUMOR,
                 RegionMask, StudyConfig, VoxelGrid)

EPS = 1e-12
COARSENESS_CAP = 1e6  # homogeneous region -> 1/0; capped, documented

REGION_TOKENS = (("ED", EDEMA), ("ET", ENHANCING), ("NEC", NECROSIS),
                 ("WT", WHOLE_TUMOR))

GTSDM_FEATURES = ("Autocorrelation", "Contrast", "Energy", "Entropy",
                  "Homogeneity", "Correlation")
NGTDM_FEATURES = ("Coarseness", "Contrast", "Busyness", "Complexity", "Strength")
# The two published-style spellings are kept verbatim so table names are
# reproducible strings.
GLZSM_FEATURES = ("SmallZoneEmphasis", "LargeZoneEmphasis",
                  "Low_Gray_Level_Zone_Emphasis", "High_Gray_Level_Zone_Emphasis",
                  "SmallZoneLowGrayEmphasis", "SmallZoneHighGrayEmphasis",
                  "LargeZoneLowGrayEmphasis", "LargeZoneHighGrayEmphasis")
HISTOGRAM_FEATURES = ("Mean", "Variance", "Skewness", "Kurtosis", "Energy", "Entropy")
SHAPE_FEATURES = ("Volume", "VolumeRatio", "FirstAxisLength", "SecondAxisLength",
                  "ThirdAxisLength", "Eccentricity", "Orientation_x",
                  "Orientation_y", "Orientation_z", "Extent",
                  "BBoxMin_x", "BBoxMin_y", "BBoxMin_z",
                  "BBoxMax_x", "BBoxMax_y", "BBoxMax_z")

_STRUCT26 = np.ones((3, 3, 3), dtype=bool)


@dataclass(frozen=True)
class QuantizedRegion:
    """A masked region quantized to integer levels 1..levels.

    ``dense`` holds the level volume with 0 outside the region so that
    neighborhood operations stay simple array shifts.
    """

    levels: int
    dense: np.ndarray
    coords: np.ndarray
    level_values: np.ndarray

    @property
    def size(self):
        return len(self.level_values)

    @property
    def bounding_box(self):
        lo = self.coords.min(axis=0)
        hi = self.coords.max(axis=0)
        return tuple(lo), tuple(hi)


def quantize(grid: VoxelGrid, mask: RegionMask, label, levels: int) -> QuantizedRegion:
    """Min-max quantize region intensities onto 1..levels.

    level(v) = min(levels, 1 + floor(levels * (I(v)-min)/(max-min))); a
    constant region maps every voxel to level 1.
    """
    if levels < 2:
        raise ValueError("levels must be >= 2")
    if mask.dims != grid.dims:
        raise ValueError(f"mask dims {mask.dims} do not match grid dims {grid.dims}")
    region = mask.region(label)
    if not region.any():
        raise ValueError(f"empty region for label {label!r}")
    vals = grid.data[region]
    lo, hi = vals.min(), vals.max()
    dense = np.zeros(grid.dims, dtype=np.int32)
    if hi > lo:
        lv = 1 + np.floor(levels * (vals - lo) / (hi - lo)).astype(np.int32)
        np.minimum(lv, levels, out=lv)
    else:
        lv = np.ones(vals.shape, dtype=np.int32)
    dense[region] = lv
    coords = np.argwhere(region)
    return QuantizedRegion(levels, dense, coords, lv)


# ---------------------------------------------------------------------------
# GTSDM

def cooccurrence_matrix(q: QuantizedRegion, offset) -> np.ndarray:
    """Symmetric normalized co-occurrence matrix for one voxel offset."""
    off = tuple(int(o) for o in offset)
    if off == (0, 0, 0):
        raise ValueError("offset must be nonzero")
    dense = q.dense
    src = [slice(max(0, -o), min(n, n - o)) for o, n in zip(off, dense.shape)]
    dst = [slice(max(0, o), min(n, n + o)) for o, n in zip(off, dense.shape)]
    a = dense[tuple(src)]
    b = dense[tuple(dst)]
    valid = (a > 0) & (b > 0)
    if not valid.any():
        raise ValueError(f"no in-region voxel pairs at offset {off}")
    i = a[valid] - 1
    j = b[valid] - 1
    counts = np.zeros((q.levels, q.levels))
    np.add.at(counts, (i, j), 1.0)
    counts = counts + counts.T
    return counts / counts.sum()


def gtsdm_features(q: QuantizedRegion, offset) -> dict[str, float]:
    """Haralick-family features of the co-occurrence matrix at `offset`."""
    p = cooccurrence_matrix(q, offset)
    levels = np.arange(1, q.levels + 1, dtype=np.float64)
    ii = levels[:, None]
    jj = levels[None, :]
    px = p.sum(axis=1)
    mu = float(levels @ px)
    sigma2 = float(((levels - mu) ** 2) @ px)
    autocorr = float((ii * jj * p).sum())
    contrast = float(((ii - jj) ** 2 * p).sum())
    energy = float((p ** 2).sum())
    nz = p[p > 0]
    entropy = float(-(nz * np.log2(nz)).sum())
    homogeneity = float((p / (1.0 + (ii - jj) ** 2)).sum())
    if sigma2 <= 0:
        correlation = 1.0  # flat region: perfectly correlated by convention
    else:
        correlation = (autocorr - mu * mu) / sigma2
    return {"Autocorrelation": autocorr, "Contrast": contrast, "Energy": energy,
            "Entropy": entropy, "Homogeneity": homogeneity,
            "Correlation": correlation}


# ---------------------------------------------------------------------------
# NGTDM

def ngtdm_table(q: QuantizedRegion):
    """Per-level (n_i, p_i, s_i) over the 26-neighborhood.

    Border voxels use the partial in-region neighborhood; voxels with no
    in-region neighbor count towards n_i and contribute 0 to s_i.
    """
    dense = q.dense
    region = dense > 0
    nbr_sum = np.zeros(dense.shape)
    nbr_cnt = np.zeros(dense.shape)
    vals = np.where(region, dense.astype(np.float64), 0.0)
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dz in (-1, 0, 1):
                if (dx, dy, dz) == (0, 0, 0):
                    continue
                src = [slice(max(0, -o), min(n, n - o))
                       for o, n in zip((dx, dy, dz), dense.shape)]
                dst = [slice(max(0, o), min(n, n + o))
                       for o, n in zip((dx, dy, dz), dense.shape)]
                nbr_sum[tuple(dst)] += vals[tuple(src)]
                nbr_cnt[tuple(dst)] += region[tuple(src)]
    lv = dense[region].astype(np.float64)
    cnt = nbr_cnt[region]
    with np.errstate(invalid="ignore"):
        diff = np.abs(lv - nbr_sum[region] / cnt)
    diff[cnt == 0] = 0.0
    n_i = np.bincount(dense[region], minlength=q.levels + 1)[1:].astype(np.float64)
    s_i = np.zeros(q.levels)
    np.add.at(s_i, dense[region] - 1, diff)
    p_i = n_i / n_i.sum()
    return n_i, p_i, s_i


def ngtdm_features(q: QuantizedRegion) -> dict[str, float]:
    n_i, p_i, s_i = ngtdm_table(q)
    occupied = p_i > 0
    i_occ = np.arange(1, q.levels + 1, dtype=np.float64)[occupied]
    p_occ = p_i[occupied]
    s_occ = s_i[occupied]
    n = n_i.sum()
    ngp = occupied.sum()

    ps = float(p_occ @ s_occ)
    coarseness = 1.0 / ps if ps > 0 else COARSENESS_CAP

    di = i_occ[:, None] - i_occ[None, :]
    pp = p_occ[:, None] * p_occ[None, :]
    if ngp > 1:
        contrast = float((pp * di ** 2).sum()) / (ngp * (ngp - 1)) * float(s_occ.sum()) / n
    else:
        contrast = 0.0

    ipi = i_occ * p_occ
    denom = float(np.abs(ipi[:, None] - ipi[None, :]).sum())
    busyness = ps / denom if denom > 0 else 0.0

    psum = p_occ[:, None] + p_occ[None, :]
    pssum = (p_occ * s_occ)[:, None] + (p_occ * s_occ)[None, :]
    complexity = float((np.abs(di) * pssum / psum).sum()) / n

    strength = float((psum * di ** 2).sum()) / (EPS + float(s_occ.sum()))
    return {"Coarseness": coarseness, "Contrast": contrast, "Busyness": busyness,
            "Complexity": complexity, "Strength": strength}


# ---------------------------------------------------------------------------
# GLZSM

def zone_decomposition(q: QuantizedRegion):
    """26-connected constant-level zones as a list of (level, size) pairs."""
    zones = []
    for level in np.unique(q.level_values):
        labeled, nzones = ndimage.label(q.dense == level, structure=_STRUCT26)
        sizes = np.bincount(labeled.ravel())[1:]
        zones.extend((int(level), int(s)) for s in sizes)
    return zones


def glzsm_features(q: QuantizedRegion) -> dict[str, float]:
    zones = zone_decomposition(q)
    g = np.array([z[0] for z in zones], dtype=np.float64)
    s = np.array([z[1] for z in zones], dtype=np.float64)
    z = len(zones)
    return {
        "SmallZoneEmphasis": float(np.sum(1.0 / s ** 2)) / z,
        "LargeZoneEmphasis": float(np.sum(s ** 2)) / z,
        "Low_Gray_Level_Zone_Emphasis": float(np.sum(1.0 / g ** 2)) / z,
        "High_Gray_Level_Zone_Emphasis": float(np.sum(g ** 2)) / z,
        "SmallZoneLowGrayEmphasis": float(np.sum(1.0 / (s ** 2 * g ** 2))) / z,
        "SmallZoneHighGrayEmphasis": float(np.sum(g ** 2 / s ** 2)) / z,
        "LargeZoneLowGrayEmphasis": float(np.sum(s ** 2 / g ** 2)) / z,
        "LargeZoneHighGrayEmphasis": float(np.sum(s ** 2 * g ** 2)) / z,
    }


# ---------------------------------------------------------------------------
# Histogram

@dataclass(frozen=True)
class HistogramSummary:
    mean: float
    variance: float
    skewness: float
    kurtosis: float
    energy: float
    entropy: float
    degenerate: bool = False

    def as_dict(self):
        return {"Mean": self.mean, "Variance": self.variance,
                "Skewness": self.skewness, "Kurtosis": self.kurtosis,
                "Energy": self.energy, "Entropy": self.entropy}


def histogram_features(grid: VoxelGrid, mask: RegionMask, label,
                       levels: int = 32) -> HistogramSummary:
    """Moments of raw region intensities plus L-bin energy/entropy.

    Skewness and excess kurtosis of zero-variance data are defined as 0
    (flagged), never NaN.
    """
    region = mask.region(label)
    if not region.any():
        raise ValueError(f"empty region for label {label!r}")
    vals = grid.data[region]
    mean = float(vals.mean())
    var = float(vals.var())
    degenerate = var == 0.0
    if degenerate:
        skew = kurt = 0.0
    else:
        centered = vals - mean
        m2 = float((centered ** 2).mean())
        skew = float((centered ** 3).mean()) / m2 ** 1.5
        kurt = float((centered ** 4).mean()) / m2 ** 2 - 3.0
    q = quantize(grid, mask, label, levels)
    p = np.bincount(q.level_values, minlength=levels + 1)[1:] / q.size
    energy = float((p ** 2).sum())
    nz = p[p > 0]
    entropy = float(-(nz * np.log2(nz)).sum())
    return HistogramSummary(mean, var, skew, kurt, energy, entropy, degenerate)


# ---------------------------------------------------------------------------
# Shape

@dataclass(frozen=True)
class ShapeSummary:
    volume: float
    volume_ratio: float
    axis_lengths: tuple[float, float, float]
    eccentricity: float
    orientation: tuple[float, float, float]
    extent: float
    bbox_min: tuple[float, float, float]
    bbox_max: tuple[float, float, float]
    degenerate: bool = False

    def as_dict(self):
        d = {"Volume": self.volume, "VolumeRatio": self.volume_ratio,
             "FirstAxisLength": self.axis_lengths[0],
             "SecondAxisLength": self.axis_lengths[1],
             "ThirdAxisLength": self.axis_lengths[2],
             "Eccentricity": self.eccentricity, "Extent": self.extent}
        for axis, name in enumerate("xyz"):
            d[f"Orientation_{name}"] = self.orientation[axis]
            d[f"BBoxMin_{name}"] = self.bbox_min[axis]
            d[f"BBoxMax_{name}"] = self.bbox_max[axis]
        return d


def shape_features(mask: RegionMask, label, brain_label=BRAIN) -> ShapeSummary:
    """Volumetric and principal-axis descriptors of a labelled region.

    Axis lengths are 4*sqrt(eigenvalues) of the voxel-center coordinate
    covariance in mm, sorted descending.  Orientation angles are between
    each principal axis and the same-rank coordinate axis.
    """
    region = mask.region(label)
    if not region.any():
        raise ValueError(f"empty region for label {label!r}")
    brain = mask.region(brain_label)
    if not brain.any():
        raise ValueError(f"empty brain region for label {brain_label!r}")
    spacing = np.asarray(mask.spacing)
    coords = np.argwhere(region) * spacing
    n = len(coords)
    volume = n * float(np.prod(spacing))
    volume_ratio = n / float(brain.sum())

    centered = coords - coords.mean(axis=0)
    cov = centered.T @ centered / n
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    axis_lengths = tuple(4.0 * np.sqrt(evals))
    degenerate = evals[1] <= 0
    eccentricity = 1.0 if degenerate else float(np.sqrt(1.0 - evals[1] / evals[0]))
    orientation = tuple(float(np.arccos(np.clip(abs(evecs[axis, axis]), 0.0, 1.0)))
                        for axis in range(3))

    idx = np.argwhere(region)
    lo = idx.min(axis=0)
    hi = idx.max(axis=0)
    bbox_voxels = int(np.prod(hi - lo + 1))
    extent = n / bbox_voxels
    return ShapeSummary(volume, volume_ratio, axis_lengths, eccentricity,
                        orientation, extent,
                        tuple(lo * spacing), tuple((hi + 1) * spacing), degenerate)


# ---------------------------------------------------------------------------
# Full conventional row

def conventional_feature_names(config: StudyConfig) -> list[str]:
    """Deterministic name list for one extract_conventional row."""
    names = []
    n_off = len(config.offsets)
    for token, _ in REGION_TOKENS:
        for k in range(1, n_off + 1):
            names += [f"T1C_{token}_GTSDM_{f}_d{k}" for f in GTSDM_FEATURES]
        names += [f"T1C_{token}_NGTDM_{f}" for f in NGTDM_FEATURES]
        names += [f"T1C_{token}_GLZSM_{f}" for f in GLZSM_FEATURES]
        names += [f"T1C_{token}_Histogram_{f}" for f in HISTOGRAM_FEATURES]
        names += [f"T1C_{token}_Shape_{f}" for f in SHAPE_FEATURES]
    return names


def _region_features(grid, mask, label, config, prefix):
    row = {}
    q = quantize(grid, mask, label, config.levels)
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
    for f, v in histogram_features(grid, mask, label, config.levels).as_dict().items():
        row[f"{prefix}_Histogram_{f}"] = v
    for f, v in shape_features(mask, label).as_dict().items():
        row[f"{prefix}_Shape_{f}"] = v
    return row


def extract_conventional(grid: VoxelGrid, mask: RegionMask,
                         config: StudyConfig | None = None) -> dict[str, float]:
    """One named value per (region x family x feature x offset-index).

    Missing regions produce NaN cells for their names rather than failing.
    """
    config = config or StudyConfig()
    if mask.dims != grid.dims:
        raise ValueError(f"mask dims {mask.dims} do not match grid dims {grid.dims}")
    row = {name: np.nan for name in conventional_feature_names(config)}
    for token, label in REGION_TOKENS:
        if not mask.region(label).any():
            continue
        row.update(_region_features(grid, mask, label, config, f"T1C_{token}"))
    return row


def feature_definitions() -> dict[str, str]:
    """One-line definition per feature family entry, for the dictionary file."""
    gtsdm = {
        "Autocorrelation": "sum_ij i*j*p(i,j) of the normalized symmetric co-occurrence matrix",
        "Contrast": "sum_ij (i-j)^2 p(i,j)",
        "Energy": "sum_ij p(i,j)^2",
        "Entropy": "-sum_ij p(i,j) log2 p(i,j) over nonzero cells",
        "Homogeneity": "sum_ij p(i,j) / (1 + (i-j)^2)",
        "Correlation": "(sum_ij i*j*p(i,j) - mu^2) / sigma^2; 1 for flat regions",
    }
    ngtdm = {
        "Coarseness": "1 / sum_i p_i s_i, capped at 1e6 for homogeneous regions",
        "Contrast": "[1/(Ngp(Ngp-1)) sum_ij p_i p_j (i-j)^2] * [sum_i s_i / N]; 0 if Ngp=1",
        "Busyness": "sum_i p_i s_i / sum_ij |i p_i - j p_j|; 0 if denominator 0",
        "Complexity": "(1/N) sum_ij |i-j| (p_i s_i + p_j s_j)/(p_i + p_j) over occupied levels",
        "Strength": "sum_ij (p_i + p_j)(i-j)^2 / (1e-12 + sum_i s_i) over occupied levels",
    }
    glzsm = {
        "SmallZoneEmphasis": "(1/Z) sum Z(g,s)/s^2",
        "LargeZoneEmphasis": "(1/Z) sum Z(g,s)*s^2",
        "Low_Gray_Level_Zone_Emphasis": "(1/Z) sum Z(g,s)/g^2",
        "High_Gray_Level_Zone_Emphasis": "(1/Z) sum Z(g,s)*g^2",
        "SmallZoneLowGrayEmphasis": "(1/Z) sum Z(g,s)/(s^2 g^2)",
        "SmallZoneHighGrayEmphasis": "(1/Z) sum Z(g,s)*g^2/s^2",
        "LargeZoneLowGrayEmphasis": "(1/Z) sum Z(g,s)*s^2/g^2",
        "LargeZoneHighGrayEmphasis": "(1/Z) sum Z(g,s)*s^2*g^2",
    }
    hist = {
        "Mean": "mean of raw region intensities",
        "Variance": "population variance of raw region intensities",
        "Skewness": "m3/m2^1.5; 0 for zero-variance regions",
        "Kurtosis": "excess kurtosis m4/m2^2 - 3; 0 for zero-variance regions",
        "Energy": "sum p_b^2 over the L-bin min-max histogram",
        "Entropy": "-sum p_b log2 p_b over occupied histogram bins",
    }
    shape = {
        "Volume": "voxel count * voxel volume (mm^3)",
        "VolumeRatio": "region voxel count / brain voxel count",
        "FirstAxisLength": "4*sqrt(largest covariance eigenvalue) in mm",
        "SecondAxisLength": "4*sqrt(second covariance eigenvalue) in mm",
        "ThirdAxisLength": "4*sqrt(smallest covariance eigenvalue) in mm",
        "Eccentricity": "sqrt(1 - lambda2/lambda1); 1 (flagged) for degenerate regions",
        "Orientation_x": "angle between first principal axis and x axis (rad)",
        "Orientation_y": "angle between second principal axis and y axis (rad)",
        "Orientation_z": "angle between third principal axis and z axis (rad)",
        "Extent": "region voxel count / bounding-box voxel count",
        "BBoxMin_x": "bounding-box lower corner x (mm)",
        "BBoxMin_y": "bounding-box lower corner y (mm)",
        "BBoxMin_z": "bounding-box lower corner z (mm)",
        "BBoxMax_x": "bounding-box upper corner x (mm)",
        "BBoxMax_y": "bounding-box upper corner y (mm)",
        "BBoxMax_z": "bounding-box upper corner z (mm)",
    }
    return {"GTSDM": gtsdm, "NGTDM": ngtdm, "GLZSM": glzsm,
            "Histogram": hist, "Shape": shape}
