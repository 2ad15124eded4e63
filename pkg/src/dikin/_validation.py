"""Input validation helpers shared by the public API."""

import numpy as np
from sklearn.utils import check_array, column_or_1d

from .exceptions import DimensionMismatch


def check_constraints(A, b):
    """Validate a constraint system ``A x >= b`` and return float arrays."""
    A = check_array(A, dtype=np.float64, ensure_2d=True, copy=True,
                    input_name="A")
    try:
        b = column_or_1d(np.asarray(b, dtype=np.float64), warn=False)
    except ValueError as exc:
        raise DimensionMismatch(f"b must be a vector: {exc}") from None
    if not np.all(np.isfinite(b)):
        raise ValueError("b contains non-finite entries")
    if A.shape[0] != b.shape[0]:
        raise DimensionMismatch(
            f"A has {A.shape[0]} rows but b has length {b.shape[0]}")
    return A, b.copy()


def check_point(x, n, name="x"):
    """Return ``x`` as a finite float vector of length ``n``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.ndim != 1 or x.shape[0] != n:
        raise DimensionMismatch(
            f"{name} must have shape ({n},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite entries")
    return x


def check_positive_int(value, name, minimum=1):
    if int(value) != value or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value}")
    return int(value)
