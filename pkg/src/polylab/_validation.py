"""Input validation helpers shared by the estimators and the geometry kernels."""

import numbers

import numpy as np
from sklearn.utils.validation import check_array

MIN_DIM = 2
MAX_DIM = 6


def check_dimension(d, allow_line=False):
    lo = 1 if allow_line else MIN_DIM
    if not isinstance(d, numbers.Integral) or not lo <= d <= MAX_DIM:
        raise ValueError(f"dimension must be an integer in [{lo}, {MAX_DIM}], got {d!r}")
    return int(d)


def check_cloud(points, d=None, allow_line=False, min_points=1):
    """Return ``points`` as a finite float array of shape (n, d)."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    arr = check_array(arr, ensure_min_samples=min_points, ensure_all_finite=True)
    check_dimension(arr.shape[1], allow_line=allow_line)
    if d is not None and arr.shape[1] != d:
        raise ValueError(f"expected points in dimension {d}, got {arr.shape[1]}")
    return arr


def check_vectors(z, d):
    """Accept a single vector or a stack of them; return (array (m, d), was_single)."""
    arr = np.asarray(z, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] != d:
        raise ValueError(f"expected vectors of length {d}, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vectors must be finite")
    return arr, single


def check_unit(u, d, tol=1e-9):
    arr, single = check_vectors(u, d)
    norms = np.linalg.norm(arr, axis=1)
    if np.any(np.abs(norms - 1.0) > tol):
        raise ValueError("direction vectors must have unit norm")
    return arr, single


def check_positive(name, value, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real, got {value!r}")
    if value < 0 or (strict and value == 0):
        bound = "> 0" if strict else ">= 0"
        raise ValueError(f"{name} must be {bound}, got {value!r}")
    return float(value)
