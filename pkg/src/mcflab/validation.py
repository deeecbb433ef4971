"""Input checks shared by the estimator facade."""

from __future__ import annotations

import math

import numpy as np

from .flow import FlowState
from .geometry import AxisymProfile, Geometry, PolyCurve


def check_geometry(X) -> FlowState:
    """Coerce ``X`` to a :class:`FlowState`.

    Accepts a state, a geometry, a tuple of geometries or an ``(N, 2)``
    array, which is read as a closed counter-clockwise polygon.
    """
    if isinstance(X, FlowState):
        return X
    if isinstance(X, (PolyCurve, AxisymProfile)):
        return FlowState(X, 0.0)
    if isinstance(X, (tuple, list)) and X and all(isinstance(g, (PolyCurve, AxisymProfile)) for g in X):
        return FlowState(tuple(X), 0.0)
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected an (N, 2) array of vertices, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vertex coordinates must be finite")
    return FlowState(PolyCurve(arr, closed=True), 0.0)


def check_positive(name: str, value, allow_inf: bool = False) -> float:
    v = float(value)
    if not v > 0 or (math.isinf(v) and not allow_inf) or math.isnan(v):
        raise ValueError(f"{name} must be positive, got {value!r}")
    return v


def check_times(times) -> np.ndarray:
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if t.ndim != 1 or not np.all(np.isfinite(t)):
        raise ValueError("times must be a finite 1-d sequence")
    return t


def check_fitted(est, attr: str = "history_"):
    if not hasattr(est, attr):
        raise AttributeError(f"{type(est).__name__} is not fitted yet; call fit first")


def as_geometry(g) -> Geometry:
    return check_geometry(g).single
