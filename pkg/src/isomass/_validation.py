"""Small input-validation helpers shared by the estimators."""

import numbers

import numpy as np
from sklearn.utils.validation import check_is_fitted  # noqa: F401  (re-export)

from .exceptions import DataError


def check_vector(z, n=None, name="z"):
    """Return ``z`` as a contiguous 1-D float64 array, optionally of length ``n``."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 1:
        raise DataError(f"{name} must be a 1-D vector, got shape {z.shape}")
    if n is not None and z.shape[0] != n:
        raise DataError(f"{name} has length {z.shape[0]}, expected {n}")
    if not np.all(np.isfinite(z)):
        raise DataError(f"{name} contains non-finite entries")
    return np.ascontiguousarray(z)


def check_batch(X, n, name="X"):
    """Validate a (n_samples, n) batch or a single vector; returns (2-D array, was_1d)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        return check_vector(X, n, name)[None, :], True
    if X.ndim != 2 or X.shape[1] != n:
        raise DataError(f"{name} must have shape (n_samples, {n}), got {X.shape}")
    return X, False


def check_positive_int(value, name, minimum=1):
    if not isinstance(value, numbers.Integral) or isinstance(value, bool):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)
