"""Small input-validation helpers used by the estimators and operations."""
import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import ConfigurationError, DomainError, PreconditionError


def as_1d_float(values, name="values", min_length=1):
    """Return ``values`` as a finite 1-d float array.

    Accepts lists, 1-d arrays, or single-column 2-d arrays (the sklearn
    ``X`` convention).
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    arr = check_array(arr, ensure_2d=False, dtype=float, input_name=name,
                      ensure_min_samples=min_length)
    if arr.ndim != 1:
        raise PreconditionError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def check_strictly_positive(arr, name="values"):
    arr = np.asarray(arr, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"{name} must be finite and strictly positive")
    return arr


def check_strictly_increasing(arr, name="values"):
    if np.any(np.diff(arr) <= 0):
        raise PreconditionError(f"{name} must be strictly increasing")
    return arr


def is_power_of_two(n):
    return isinstance(n, numbers.Integral) and n > 0 and (n & (n - 1)) == 0


def check_grid_size(n_points, minimum=16):
    if isinstance(n_points, bool) or not is_power_of_two(n_points) or n_points < minimum:
        raise ConfigurationError(
            f"n_points must be a power of two >= {minimum}, got {n_points!r}")
    return int(n_points)


def check_order(q):
    """Fractional order must lie in the studied range [1, 3]."""
    q = float(q)
    if not (1.0 <= q <= 3.0):
        raise DomainError(f"fractional order q={q} outside [1, 3]")
    return q
