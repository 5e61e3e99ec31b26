"""Input validation helpers used by the estimators and core functions."""

from __future__ import annotations

import numpy as np

from .exceptions import InputError


def check_vector(x, name: str = "x", min_len: int = 1) -> np.ndarray:
    """Coerce to a 1-d float64 array and reject NaN/inf values."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        arr = arr.reshape(-1) if arr.ndim == 2 and 1 in arr.shape else arr
    if arr.ndim != 1:
        raise InputError(f"{name} must be one-dimensional, got shape {np.shape(x)}")
    if arr.size < min_len:
        raise InputError(f"{name} needs at least {min_len} values, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains NaN or infinite values")
    return arr


def check_matrix(x, name: str = "X") -> np.ndarray:
    """Coerce to a 2-d float64 array (a vector becomes a single column)."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InputError(f"{name} must be a matrix, got {arr.ndim} dimensions")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InputError(f"{name} must be non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains NaN or infinite values")
    return arr


def check_paired(x, y, xname: str = "x", yname: str = "y"):
    xa = check_vector(x, xname)
    ya = check_vector(y, yname)
    if xa.size != ya.size:
        raise InputError(
            f"{xname} and {yname} must have equal length, got {xa.size} and {ya.size}"
        )
    return xa, ya


def check_probability(p, name: str = "p", *, open_interval: bool = True) -> np.ndarray:
    arr = np.asarray(p, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains NaN or infinite values")
    if open_interval:
        if np.any(arr <= 0.0) or np.any(arr >= 1.0):
            raise InputError(f"{name} must lie strictly inside (0, 1)")
    else:
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise InputError(f"{name} must lie in [0, 1]")
    return arr


def check_tail_count(k, n: int) -> int:
    """Validate the tail sample size k against the sample size n.

    The semi-parametric fit keeps k order statistics in each tail and
    needs a bulk in between, so k must satisfy 8 <= k < n / 4.
    """
    k = int(k)
    if k < 8:
        raise InputError(f"k must be at least 8, got {k}")
    if not k < n / 4:
        raise InputError(f"k must be smaller than n/4 (n={n}), got {k}")
    return k


def resolve_tail_count(k, n: int) -> int:
    """Apply the default k = n // 10 when k is None, then validate."""
    if k is None:
        k = n // 10
    return check_tail_count(k, n)
