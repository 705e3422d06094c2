"""Input validation helpers shared by the estimators and the numerical kernels."""

from numbers import Real

import numpy as np


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NumericalFailure(RuntimeError):
    """A numerical procedure could not produce a usable result."""


def check_positive(value, name, *, strict=True):
    if not isinstance(value, Real) or not np.isfinite(value):
        raise DomainError(f"{name} must be a finite real number, got {value!r}")
    if strict and value <= 0:
        raise DomainError(f"{name} must be positive, got {value!r}")
    if not strict and value < 0:
        raise DomainError(f"{name} must be non-negative, got {value!r}")
    return float(value)


def check_in_range(value, name, low, high, *, closed_low=True, closed_high=True):
    value = float(value)
    ok_low = value >= low if closed_low else value > low
    ok_high = value <= high if closed_high else value < high
    if not (ok_low and ok_high and np.isfinite(value)):
        lb = "[" if closed_low else "("
        rb = "]" if closed_high else ")"
        raise DomainError(f"{name} must lie in {lb}{low}, {high}{rb}, got {value!r}")
    return value


def check_array(values, name="values"):
    """Return a 1-D float64 copy of ``values``; reject NaN/Inf."""
    arr = np.array(values, dtype=np.float64, copy=True).reshape(-1)
    if arr.size == 0:
        raise DomainError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains NaN or Inf")
    return arr


def check_same_grid(a, b):
    """Raise if two grid vectors do not live on the same grid."""
    if a.size != b.size:
        raise DomainError(f"dimension mismatch: {a.size} vs {b.size}")
    if not np.isclose(a.grid_spacing, b.grid_spacing, rtol=1e-12, atol=0.0):
        raise DomainError(
            f"grid spacing mismatch: {a.grid_spacing} vs {b.grid_spacing}")


def check_sorted_grid(grid, name, *, decreasing=False):
    arr = check_array(grid, name)
    if np.any(arr <= 0):
        raise DomainError(f"{name} must be positive")
    diffs = np.diff(arr)
    if decreasing and np.any(diffs >= 0):
        raise DomainError(f"{name} must be strictly decreasing")
    if not decreasing and np.any(diffs <= 0):
        raise DomainError(f"{name} must be strictly increasing")
    return arr
