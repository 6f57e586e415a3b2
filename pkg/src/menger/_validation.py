"""Input validation helpers built on sklearn's ``check_array``."""

import numpy as np
from sklearn.utils import check_array

from .exceptions import DomainError


def check_points(X, *, min_points=1, name="X"):
    """Return ``X`` as a finite float64 array of shape (N, n)."""
    try:
        X = check_array(X, dtype=np.float64, ensure_2d=True,
                        ensure_min_samples=min_points, input_name=name)
    except ValueError as exc:
        raise DomainError(str(exc)) from exc
    return X


def check_vector(v, n=None, *, name="x"):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise DomainError(f"{name} must be a 1-d vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise DomainError(f"{name} has non-finite coordinates")
    if n is not None and v.shape[0] != n:
        raise DomainError(f"{name} has dimension {v.shape[0]}, expected {n}")
    return v


def check_weights(weights, n_points):
    if weights is None:
        return np.ones(n_points)
    w = np.asarray(weights, dtype=np.float64).ravel()
    if w.shape[0] != n_points:
        raise DomainError(
            f"got {w.shape[0]} weights for {n_points} points")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise DomainError("weights must be finite and nonnegative")
    if w.sum() <= 0:
        raise DomainError("total weight must be positive")
    return w


def check_ratio(value, name, *, low=0.0, high=1.0):
    """Require ``low < value < high``."""
    value = float(value)
    if not (low < value < high):
        raise DomainError(f"{name} must lie in ({low}, {high}), got {value}")
    return value


def check_positive(value, name):
    value = float(value)
    if not (value > 0 and np.isfinite(value)):
        raise DomainError(f"{name} must be positive and finite, got {value}")
    return value
