"""Small input-validation helpers shared across the package."""

from __future__ import annotations

import numpy as np

from .exceptions import ConfigError, DataError, DomainError


def as_float_vector(x, name: str) -> np.ndarray:
    """Coerce to a 1-d float64 array, rejecting non-finite entries."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ConfigError(f"{name}: expected a 1-d array, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise DataError(f"{name}: non-finite value at position {bad}")
    return arr


def check_positive(value, name: str) -> float:
    value = float(value)
    if not value > 0:
        raise ConfigError(f"{name} must be positive, got {value}")
    return value


def check_probability(p, name: str = "p") -> float:
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"{name} must lie in the open interval (0, 1), got {p}")
    return p


def check_in_range(x, lo: float, hi: float, name: str) -> np.ndarray:
    """Validate that all values fall inside the training range [lo, hi]."""
    arr = np.asarray(x, dtype=float)
    if arr.size and (arr.min() < lo or arr.max() > hi):
        bad = float(arr.min()) if arr.min() < lo else float(arr.max())
        raise DomainError(
            f"covariate '{name}': value {bad:g} outside the training range "
            f"[{lo:g}, {hi:g}]"
        )
    return arr


def check_square(mat, name: str) -> np.ndarray:
    arr = np.asarray(mat, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ConfigError(f"{name}: expected a square matrix, got shape {arr.shape}")
    return arr
