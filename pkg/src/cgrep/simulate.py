"""Synthetic datasets with known ground truth.

Three generators back the validation suite:

* ``simulate_dependent``: Clayton-coupled latent survival/censoring pairs
  with exponential-baseline Cox marginals; the latent (T, U) are retained
  so tests can check the observed-data construction and Kendall's tau.
* ``simulate_classification``: separable-vs-noise feature tables.
* ``simulate_phantom``: constant / checkerboard / ramp / fractional
  Brownian phantoms plus a standard 4-region mask.

Everything is a pure function of its spec + seed (byte-identical reruns).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_random_state
from .io import BRAIN, EDEMA, ENHANCING, NECROSIS, FeatureTable, RegionMask, VoxelGrid

PHANTOM_KINDS = ("constant", "checkerboard", "ramp", "fbm")


@dataclass
class SimSpec:
    """Parameters of one dependent-censoring simulation."""

    n: int = 200
    alpha: float = 0.0
    beta: tuple[float, ...] = (1.0,)
    gamma: tuple[float, ...] = (0.5,)
    lambda_t: float = 1.0
    lambda_u: float = 1.0
    seed: int = 0
    feature_dist: str = "uniform"  # "uniform" on [0,1] or "normal"

    def __post_init__(self):
        self.beta = tuple(float(b) for b in np.atleast_1d(self.beta))
        self.gamma = tuple(float(g) for g in np.atleast_1d(self.gamma))
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.lambda_t <= 0 or self.lambda_u <= 0:
            raise ValueError("baseline rates must be positive")
        if len(self.beta) != len(self.gamma):
            raise ValueError("beta and gamma must have the same length")
        if self.feature_dist not in ("uniform", "normal"):
            raise ValueError(f"unknown feature_dist {self.feature_dist!r}")


@dataclass
class SimDataset:
    """Observed table + records alongside the hidden latent truth."""

    table: FeatureTable
    records: list = field(default_factory=list)
    latent_t: np.ndarray | None = None
    latent_u: np.ndarray | None = None


def sample_clayton_pair(n, alpha, rng):
    """(V1, V2) uniform marginals coupled by a Clayton copula.

    Conditional inversion: V1 uniform, then
    V2 = [(W^(-alpha/(1+alpha)) - 1) * V1^(-alpha) + 1]^(-1/alpha).
    """
    v1 = rng.uniform(size=n)
    w = rng.uniform(size=n)
    if alpha == 0:
        return v1, w
    v2 = ((w ** (-alpha / (1.0 + alpha)) - 1.0) * v1 ** (-alpha) + 1.0) ** (-1.0 / alpha)
    return v1, v2


def simulate_dependent(spec: SimSpec) -> SimDataset:
    """Draw (features, T, U) from the Clayton-dependent Cox model."""
    from .survival import SurvivalRecord

    rng = check_random_state(spec.seed)
    k = len(spec.beta)
    if spec.feature_dist == "uniform":
        x = rng.uniform(size=(spec.n, k))
    else:
        x = rng.normal(size=(spec.n, k))
    lin_t = x @ np.asarray(spec.beta)
    lin_u = x @ np.asarray(spec.gamma)
    v1, v2 = sample_clayton_pair(spec.n, spec.alpha, rng)
    # S_T(T|x) = exp(-lambda_t * T * e^(beta x)) = V1  =>  invert
    latent_t = -np.log(v1) / (spec.lambda_t * np.exp(lin_t))
    latent_u = -np.log(v2) / (spec.lambda_u * np.exp(lin_u))
    observed = np.minimum(latent_t, latent_u)
    delta = (latent_t <= latent_u).astype(np.int64)

    ids = [f"S{i:04d}" for i in range(spec.n)]
    features = {f"x{j + 1}": x[:, j].copy() for j in range(k)}
    table = FeatureTable(ids, features, time_days=observed.copy(),
                         event=delta.astype(np.float64))
    records = [SurvivalRecord(pid, float(t), int(d))
               for pid, t, d in zip(ids, observed, delta)]
    return SimDataset(table, records, latent_t, latent_u)


def simulate_classification(n, n_informative, n_noise, separation,
                            seed=0) -> tuple[FeatureTable, np.ndarray]:
    """Balanced binary table: informative = label*separation + N(0,1)."""
    if n < 4:
        raise ValueError("n must be >= 4")
    rng = check_random_state(seed)
    labels = np.zeros(n, dtype=np.int64)
    labels[: n // 2] = 1
    labels = rng.permutation(labels)
    cols = {}
    for j in range(n_informative):
        cols[f"inf{j + 1}"] = labels * separation + rng.normal(size=n)
    for j in range(n_noise):
        cols[f"noise{j + 1}"] = rng.normal(size=n)
    ids = [f"C{i:04d}" for i in range(n)]
    table = FeatureTable(ids, cols, rep_label=labels.astype(np.float64))
    return table, labels


# ---------------------------------------------------------------------------
# Phantoms

def _ball(dims, center, radius):
    """Voxels whose center lies within radius + 0.5 of `center`.

    The half-voxel margin makes a radius-r ball exactly inscribe its
    (2r+1)^3 bounding box, so the digital extent matches the analytic
    sphere-in-box ratio pi/6.
    """
    grids = np.ogrid[tuple(slice(0, d) for d in dims)]
    dist2 = sum((g - c) ** 2 for g, c in zip(grids, center))
    return dist2 <= (radius + 0.5) ** 2


def standard_mask(dims, spacing=(1.0, 1.0, 1.0)) -> RegionMask:
    """Concentric 4-region phantom mask: necrosis core, enhancing shell,
    edema shell, surrounding brain tissue."""
    dims = tuple(int(d) for d in dims)
    center = tuple((d - 1) / 2.0 for d in dims)
    rmax = min(dims) / 2.0 - 0.5
    labels = np.zeros(dims, dtype=np.int64)
    labels[_ball(dims, center, 0.90 * rmax)] = BRAIN
    labels[_ball(dims, center, 0.60 * rmax)] = EDEMA
    labels[_ball(dims, center, 0.40 * rmax)] = ENHANCING
    labels[_ball(dims, center, 0.20 * rmax)] = NECROSIS
    return RegionMask(labels, spacing)


def fbm_field(dims, hurst, rng, oversample=2):
    """Spectral-synthesis fractional Brownian field.

    White Gaussian noise is filtered in the Fourier domain by the
    isotropic amplitude f^(-(2H+d)/2) (spectral density f^(-(2H+d)) for a
    d-dimensional field), synthesized on an `oversample`-times larger
    periodic grid and cropped.  The result is normalized to unit mean
    absolute lag-1 increment.
    """
    if not 0.0 < hurst < 1.0:
        raise ValueError("hurst must lie in (0, 1)")
    dims = tuple(int(d) for d in dims)
    work = tuple(max(8, oversample * d) for d in dims)
    d = len(work)
    freqs = np.meshgrid(*[np.fft.fftfreq(n) for n in work], indexing="ij")
    f2 = sum(f ** 2 for f in freqs)
    f2.flat[0] = np.inf  # zero out the DC component
    amplitude = f2 ** (-(2.0 * hurst + d) / 4.0)
    noise = rng.normal(size=work)
    spectrum = np.fft.fftn(noise) * amplitude
    fieldv = np.real(np.fft.ifftn(spectrum))
    fieldv = fieldv[tuple(slice(0, n) for n in dims)]
    fieldv -= fieldv.mean()
    inc = np.concatenate([np.abs(np.diff(fieldv, axis=a)).ravel()
                          for a in range(d) if fieldv.shape[a] > 1])
    scale = inc.mean()
    if scale > 0:
        fieldv = fieldv / scale
    return fieldv


def simulate_phantom(kind, dims, hurst=0.5, seed=0, amplitude=10.0,
                     spacing=(1.0, 1.0, 1.0)):
    """A test phantom VoxelGrid and its standard 4-region mask.

    ``fbm`` fields are scaled so the mean absolute lag-1 increment equals
    `amplitude` (relief must dominate the lattice step for surface-area
    fractal estimators to see the roughness; Hoelder estimators are scale
    invariant and unaffected).
    """
    if kind not in PHANTOM_KINDS:
        raise ValueError(f"unknown phantom kind {kind!r}; expected {PHANTOM_KINDS}")
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or min(dims) < 1:
        raise ValueError(f"dims must be 3 positive integers, got {dims}")
    if kind == "constant":
        data = np.full(dims, 5.0)
    elif kind == "checkerboard":
        grids = np.ogrid[tuple(slice(0, d) for d in dims)]
        data = ((grids[0] + grids[1] + grids[2]) % 2).astype(np.float64)
    elif kind == "ramp":
        data = np.broadcast_to(np.arange(dims[0], dtype=np.float64)[:, None, None],
                               dims).copy()
    else:
        if min(d for d in dims if d > 1) < 8:
            raise ValueError("fbm phantoms need dims >= 8 per non-trivial axis")
        rng = check_random_state(seed)
        flat_axes = [i for i, d in enumerate(dims) if d == 1]
        synth_dims = tuple(d for d in dims if d > 1)
        fieldv = fbm_field(synth_dims, hurst, rng) * amplitude
        data = fieldv.reshape(dims) if flat_axes else fieldv
    return VoxelGrid(data, spacing), standard_mask(dims, spacing)
