"""Small input-validation helpers used by the estimator-facing API."""

from __future__ import annotations

import numpy as np

from .errors import FitError


def check_array(x, name="X", ndim=None, dtype=float, allow_nan=False):
    """Coerce to a numpy array and validate shape/finiteness.

    Returns a C-contiguous array of `dtype`; raises ValueError on NaN/inf
    unless `allow_nan` is set (inf is never allowed).
    """
    arr = np.ascontiguousarray(x, dtype=dtype)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if np.issubdtype(arr.dtype, np.floating):
        if allow_nan:
            if np.isinf(arr).any():
                raise ValueError(f"{name} contains infinite values")
        elif not np.isfinite(arr).all():
            raise ValueError(f"{name} contains non-finite values")
    return arr


def check_X_y(X, y):
    """Validate a 2-D feature matrix with a matching binary 0/1 target."""
    X = check_array(X, "X")
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    elif X.ndim != 2:
        raise ValueError(f"X must be 1- or 2-dimensional, got shape {X.shape}")
    y = check_binary_labels(y)
    if len(y) != X.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but y has {len(y)}")
    return X, y


def check_binary_labels(y, name="y"):
    """Validate 0/1 labels; raises on any other value."""
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional")
    vals = np.unique(y)
    if not np.isin(vals, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0/1 values, got {vals}")
    return y.astype(np.int64)


def require_both_classes(y, name="y"):
    """Raise FitError unless y contains both a 0 and a 1."""
    y = check_binary_labels(y, name)
    if len(np.unique(y)) < 2:
        raise FitError(f"single-class target: {name} must contain both classes")
    return y


def check_random_state(seed):
    """Return a numpy Generator for an int seed, SeedSequence or Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn_rng(master_seed, *key):
    """Counter-based per-task stream: same (seed, key) -> same stream.

    Keeps iterated resampling order-independent and parallelizable.
    """
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=key))
