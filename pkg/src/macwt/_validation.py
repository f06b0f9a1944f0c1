"""Input validation helpers used by the estimators and the plain functions."""

from __future__ import annotations

import numbers

import numpy as np

from .exceptions import ShapeError

PROB_ATOL = 1e-12


def check_probability_vector(p, name="p", size=None):
    """Return ``p`` as a float array after checking it is a distribution."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ShapeError(f"{name} must be a non-empty 1-D vector, got shape {p.shape}")
    if size is not None and p.size != size:
        raise ShapeError(f"{name} has {p.size} entries, expected {size}")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValueError(f"{name} has negative or non-finite entries")
    if abs(p.sum() - 1.0) > PROB_ATOL:
        raise ValueError(f"{name} sums to {p.sum()!r}, not 1")
    return p


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_rate_pairs(rates):
    """Coerce rate pairs to an ``(m, 2)`` float array."""
    arr = np.asarray(rates, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ShapeError(f"rate pairs must have shape (m, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("rate pairs must be finite")
    return arr


def check_bit_vector(bits, name="bits"):
    arr = np.asarray(bits)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0/1 entries")
    return arr.astype(np.uint8)
