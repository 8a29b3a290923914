"""Small array-checking helpers used across modules."""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


def as_float_array(x, name: str, ndim: int | None = None) -> np.ndarray:
    """Coerce to a float64 array, rejecting NaN/Inf and wrong rank."""
    arr = np.asarray(x, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise ValidationError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains NaN or Inf")
    return arr


def as_matrix(x, name: str, min_rows: int = 1) -> np.ndarray:
    arr = as_float_array(x, name, ndim=2)
    if arr.shape[0] < min_rows:
        raise ValidationError(f"{name} needs at least {min_rows} rows, got {arr.shape[0]}")
    if arr.shape[1] < 1:
        raise ValidationError(f"{name} needs at least 1 column")
    return arr


def as_binary_mask(x, name: str) -> np.ndarray:
    """Accept a bool or {0, 1}-valued array, return it as bool."""
    arr = np.asarray(x)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.dtype == bool:
        return arr
    values = np.asarray(arr, dtype=np.float64)
    if not np.all((values == 0.0) | (values == 1.0)):
        raise ValidationError(f"{name} must contain only 0 and 1")
    return values == 1.0
