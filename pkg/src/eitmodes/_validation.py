"""Small input-validation helpers shared by the estimators and functional API."""
from __future__ import annotations

import numbers

import numpy as np

from .errors import NotNegativeDetuning


def check_negative_detuning(delta) -> float:
    try:
        delta = float(delta)
    except (TypeError, ValueError):
        raise TypeError(f"detuning must be a real number, got {delta!r}") from None
    if not np.isfinite(delta):
        raise ValueError("detuning must be finite")
    if delta >= 0:
        raise NotNegativeDetuning(
            f"delta = {delta:g} s^-1: localized transverse modes need a negative detuning "
            "(for delta >= 0 the effective potential is not confining)"
        )
    return delta


def check_detuning_grid(deltas) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(deltas, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("detuning grid must be a non-empty 1-D sequence")
    for d in arr:
        check_negative_detuning(d)
    return arr


def check_int(value, name: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if minimum is not None and value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_channels(channels) -> list[tuple[int, int]]:
    out = []
    for ch in channels:
        m, n = ch
        out.append((check_int(m, "m"), check_int(n, "n", 1)))
    if not out:
        raise ValueError("channel list is empty")
    if len(set(out)) != len(out):
        raise ValueError("duplicate channels")
    return out


def check_positive(value, name: str) -> float:
    value = float(value)
    if not (np.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be finite and > 0, got {value!r}")
    return value
