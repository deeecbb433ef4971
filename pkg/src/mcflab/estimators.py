"""Estimator-style facade over the flow and surgery drivers.

``fit`` takes initial data and runs the flow; fitted attributes end in an
underscore.  Parameters are plain constructor arguments so ``get_params`` and
``clone`` work as usual.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator

from .flow import EngineParams, FlowHistory, StopCriterion, evolve
from .surgery import SurgeryParams, surgery_flow
from .validation import check_fitted, check_geometry, check_positive, check_times


class MeanCurvatureFlow(BaseEstimator):
    """Evolve a curve or rotationally symmetric profile by mean curvature.

    Parameters
    ----------
    cfl : float
        Step safety factor.
    resolution : float, optional
        Curvature-adaptive spacing; ``None`` keeps the vertex count.
    extinction : float, optional
        Relative area at which a component is removed.
    horizon, blowup : float, optional
        Additional stop criteria.
    record : int
        Snapshot stride.
    record_times : sequence of float
        Times hit exactly and always recorded.

    Attributes
    ----------
    history_ : FlowHistory
    final_time_ : float
    extinction_time_ : float
        ``nan`` if nothing went extinct.
    """

    def __init__(
        self,
        cfl=0.4,
        resolution=None,
        extinction=1e-4,
        horizon=None,
        blowup=None,
        record=1,
        record_times=(),
    ):
        self.cfl = cfl
        self.resolution = resolution
        self.extinction = extinction
        self.horizon = horizon
        self.blowup = blowup
        self.record = record
        self.record_times = record_times

    def _stops(self):
        out = []
        if self.extinction is not None:
            out.append(StopCriterion.extinction(check_positive("extinction", self.extinction)))
        if self.horizon is not None:
            out.append(StopCriterion.horizon(self.horizon))
        if self.blowup is not None:
            out.append(StopCriterion.blowup(check_positive("blowup", self.blowup)))
        if not out:
            raise ValueError("set at least one of extinction, horizon, blowup")
        return out

    def fit(self, X, y=None):
        state = check_geometry(X)
        params = EngineParams(cfl=self.cfl, resolution=self.resolution)
        self.history_ = evolve(
            state,
            self._stops(),
            int(self.record),
            params=params,
            record_times=tuple(check_times(self.record_times)) if len(self.record_times) else (),
        )
        self.final_time_ = float(self.history_.times[-1])
        ext = self.history_.events_of("extinction")
        self.extinction_time_ = ext[-1].time if ext else math.nan
        return self

    def predict(self, times) -> list:
        """Components of the recorded slice covering each time."""
        check_fitted(self)
        return [self.history_.slice_at(t).components for t in check_times(times)]

    def transform(self, times) -> np.ndarray:
        """Dense scalar rows (see ``DENSE_COLUMNS``) nearest each time."""
        check_fitted(self)
        d = self.history_.dense_scalars
        idx = np.searchsorted(d[:, 0], check_times(times)).clip(0, len(d) - 1)
        return d[idx]


class SurgeryFlow(BaseEstimator):
    """Flow with neck surgery for rotationally symmetric, two-convex data.

    Parameters
    ----------
    delta : float
        Neck closeness.
    H_th, H_neck, H_trig : float
        Discard, neck and trigger curvatures.
    horizon : float
        Give up at this time.
    resolution : float
        Curvature-adaptive spacing of the integrator.

    Attributes
    ----------
    history_ : FlowHistory
    surgeries_ : list of SurgeryLog
    discards_ : list of DiscardRecord
    assertions_ : dict
    """

    def __init__(self, delta=0.05, H_th=10.0, H_neck=100.0, H_trig=1000.0, horizon=math.inf, resolution=0.1):
        self.delta = delta
        self.H_th = H_th
        self.H_neck = H_neck
        self.H_trig = H_trig
        self.horizon = horizon
        self.resolution = resolution

    def fit(self, X, y=None):
        state = check_geometry(X)
        params = SurgeryParams(delta=self.delta, H_th=self.H_th, H_neck=self.H_neck, H_trig=self.H_trig)
        hist: FlowHistory = surgery_flow(
            state, params, self.horizon, engine=EngineParams(resolution=check_positive("resolution", self.resolution))
        )
        self.history_ = hist
        self.surgeries_ = list(hist.info["surgeries"])
        self.discards_ = list(hist.info["discards"])
        self.assertions_ = dict(hist.info.get("assertions", {}))
        return self

    def predict(self, times) -> list:
        check_fitted(self)
        return [self.history_.slice_at(t).components for t in check_times(times)]


__all__ = ["MeanCurvatureFlow", "SurgeryFlow"]
