"""Explicit time integration of the flow ``dx/dt = -H nu``.

A :class:`FlowState` holds one or more components (surgery splits a
hypersurface into several).  :func:`evolve` repeatedly picks a stable step,
moves every vertex, remeshes when the spacing degrades, and records a
:class:`FlowHistory` until a :class:`StopCriterion` fires.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels as K
from .errors import (
    AxisViolation,
    DegenerateEdge,
    DegenerateGeometry,
    GeometryError,
    NotMeanConvex,
    SelfIntersection,
    StepTooLarge,
    UncoveredTime,
)
from .geometry import (
    AXIS_TO_AXIS,
    EDGE_EPS,
    OFF_AXIS_LOOP,
    OPEN_SEGMENT,
    AxisymProfile,
    Geometry,
    PolyCurve,
    SpacetimePoint,
    _edge_lengths,
    ball_volume,
    is_simple,
    parabolic_rescale,
    point_segment_distance,
    quantities,
    resample,
    segments,
    sphere_measure,
    total_area,
)

DENSE_COLUMNS = ("time", "area", "volume", "maxH", "minH", "minL1H", "alpha")
EVENT_KINDS = (
    "surgery",
    "discard",
    "extinction",
    "blowup_stop",
    "trigger",
    "horizon",
    "self_intersection",
    "neck_warning",
)


# --------------------------------------------------------------------------- state


@dataclass(frozen=True, eq=False)
class FlowState:
    """A time slice of the flow.

    ``geometry`` is a single geometry or a tuple of components; ``ids``
    labels the components so that they can be followed across surgeries.
    """

    geometry: object
    time: float = 0.0
    step_index: int = 0
    ids: tuple | None = None

    def __post_init__(self):
        if not math.isfinite(self.time):
            raise ValueError("time must be finite")
        comps = self.components
        if self.ids is None:
            object.__setattr__(self, "ids", tuple(range(len(comps))))
        elif len(self.ids) != len(comps):
            raise ValueError("one id per component required")

    @property
    def components(self) -> tuple:
        g = self.geometry
        return tuple(g) if isinstance(g, (tuple, list)) else (g,)

    @property
    def single(self) -> Geometry:
        comps = self.components
        if len(comps) != 1:
            raise ValueError(f"state has {len(comps)} components")
        return comps[0]

    def replace(self, components, time=None, step_index=None, ids=None) -> "FlowState":
        comps = tuple(components)
        geom = comps[0] if len(comps) == 1 and not isinstance(self.geometry, (tuple, list)) else comps
        return FlowState(
            geom,
            self.time if time is None else time,
            self.step_index if step_index is None else step_index,
            ids if ids is not None else (self.ids if len(self.ids) == len(comps) else None),
        )


@dataclass(frozen=True)
class StopCriterion:
    """When :func:`evolve` stops.

    ``horizon``: time reaches ``value``.  ``extinction``: a component's area
    drops below ``value`` times its initial area (the run stops once no
    component is left).  ``blowup``: ``max H >= value``.  ``trigger``:
    ``max H`` reaches ``value`` to within one percent.
    """

    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in ("horizon", "extinction", "blowup", "trigger"):
            raise ValueError(f"unknown stop criterion {self.kind!r}")
        if not self.value > 0 and self.kind != "horizon":
            raise ValueError("stop threshold must be positive")

    @classmethod
    def horizon(cls, T):
        return cls("horizon", float(T))

    @classmethod
    def extinction(cls, area_tol=1e-4):
        return cls("extinction", float(area_tol))

    @classmethod
    def blowup(cls, H_max):
        return cls("blowup", float(H_max))

    @classmethod
    def trigger(cls, H_trig):
        return cls("trigger", float(H_trig))


@dataclass(frozen=True)
class Event:
    time: float
    kind: str
    payload: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EngineParams:
    """Numerical constants of the integrator.

    Parameters
    ----------
    cfl : float
        Safety factor of the step rule ``cfl * h^2 / (2 + h max|H|)``.
    remesh_ratio : float
        Remesh once the max/min edge ratio exceeds this value.
    resolution : float, optional
        Curvature-adaptive meshing: local spacing is capped at
        ``resolution / |A|``.  ``None`` keeps the vertex count fixed.
    spacing : float, optional
        Largest spacing in adaptive mode; defaults to the initial mean edge.
    alpha_stride : int
        Evaluate the Andrews constant every this many steps (0: never).
    trigger_band : tuple
        Relative window around the trigger curvature that counts as a hit.
    """

    cfl: float = 0.4
    remesh_ratio: float = 2.0
    resolution: float | None = None
    spacing: float | None = None
    grade: float = 0.25
    alpha_stride: int = 0
    trigger_band: tuple = (0.99, 1.01)
    max_steps: int = 50_000_000

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must lie in (0, 1]")
        if not self.remesh_ratio > 1:
            raise ValueError("remesh_ratio must exceed 1")


# --------------------------------------------------------------------------- history


class FlowHistory:
    """Time-ordered snapshots, events and per-step scalars of one run.

    Snapshots share their time with a neighbour only at events (the states
    just before and after a surgery), so ``times`` is non-decreasing.
    ``reach[i]`` is the step size in force at snapshot ``i``; a slice at
    time ``t`` is covered when some snapshot lies within its reach of ``t``.
    """

    def __init__(self, snapshots=(), events=(), dense=None, reach=None, status="ok"):
        self.snapshots = list(snapshots)
        self.events = list(events)
        self._dense = [] if dense is None else [tuple(r) for r in np.asarray(dense).tolist()]
        self.reach = list(reach) if reach is not None else [0.0] * len(self.snapshots)
        self.status = status
        self.info: dict = {}

    # construction ---------------------------------------------------------
    @classmethod
    def from_states(cls, states: Iterable[FlowState], reach: float | Sequence[float] = 0.0) -> "FlowHistory":
        """History made of given (e.g. exact) states."""
        states = list(states)
        if np.isscalar(reach):
            reach = [float(reach)] * len(states)
        h = cls(states, reach=reach)
        for s in states:
            h._dense.append(_scalars(s.components, s.time, float("nan")))
        return h.seal()

    def record(self, state: FlowState, reach: float):
        if self.snapshots and state.time < self.snapshots[-1].time:
            raise ValueError("snapshots must be time ordered")
        self.snapshots.append(state)
        self.reach.append(float(reach))

    def add_event(self, time, kind, **payload):
        self.events.append(Event(float(time), kind, dict(payload)))

    def add_dense(self, row):
        self._dense.append(tuple(float(v) for v in row))

    def seal(self) -> "FlowHistory":
        self.snapshots = tuple(self.snapshots)
        self.events = tuple(self.events)
        self.reach = tuple(self.reach)
        self._dense = tuple(self._dense)
        return self

    # access ---------------------------------------------------------------
    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    @property
    def dense_scalars(self) -> np.ndarray:
        """Array of shape (steps, 7) with columns :data:`DENSE_COLUMNS`."""
        if not self._dense:
            return np.empty((0, len(DENSE_COLUMNS)))
        return np.array(self._dense, dtype=float)

    def column(self, name: str) -> np.ndarray:
        return self.dense_scalars[:, DENSE_COLUMNS.index(name)]

    @property
    def final(self) -> FlowState:
        return self.snapshots[-1]

    def events_of(self, kind: str) -> list:
        return [e for e in self.events if e.kind == kind]

    def covers(self, t: float) -> bool:
        try:
            self.slice_at(t)
        except UncoveredTime:
            return False
        return True

    def slice_index(self, t: float) -> int:
        times = self.times
        if len(times) == 0:
            raise UncoveredTime("empty history")
        i = int(np.searchsorted(times, t))
        best = None
        for j in (i - 1, i):
            if 0 <= j < len(times):
                d = abs(times[j] - t)
                if best is None or d < best[0]:
                    best = (d, j)
        # among equal times prefer the later (post-event) snapshot
        d, j = best
        while j + 1 < len(times) and times[j + 1] == times[j]:
            j += 1
        tol = self.reach[j] * (1.0 + 1e-9) + 1e-12 * max(1.0, abs(t))
        if d > tol:
            raise UncoveredTime(f"no snapshot within one step of t={t:.6g}")
        return j

    def nearest(self, t: float, tol: float) -> FlowState:
        """Nearest snapshot to ``t`` if it lies within ``tol``, else :class:`UncoveredTime`."""
        times = self.times
        if len(times) == 0:
            raise UncoveredTime("empty history")
        i = int(np.searchsorted(times, t))
        cand = [j for j in (i - 1, i) if 0 <= j < len(times)]
        j = min(cand, key=lambda j: (abs(times[j] - t), -j))
        while j + 1 < len(times) and times[j + 1] == times[j]:
            j += 1
        if abs(times[j] - t) > tol:
            raise UncoveredTime(f"no snapshot within {tol:.3g} of t={t:.6g}")
        return self.snapshots[j]

    def slice_at(self, t: float) -> FlowState:
        """Nearest snapshot to ``t``; :class:`UncoveredTime` if none is close."""
        return self.snapshots[self.slice_index(t)]

    def rescaled(self, center: SpacetimePoint, lam: float) -> "FlowHistory":
        """Parabolically rescaled copy: ``x -> lam (x - x0)``, ``t -> lam^2 (t - t0)``."""
        snaps = []
        for s in self.snapshots:
            comps = []
            for g in s.components:
                g2, t2 = parabolic_rescale(g, s.time, center, lam)
                comps.append(g2)
            snaps.append(s.replace(comps, time=t2))
        h = FlowHistory(snaps, reach=[lam * lam * r for r in self.reach], status=self.status)
        for e in self.events:
            h.events.append(Event(lam * lam * (e.time - center.t0), e.kind, e.payload))
        for s in snaps:
            h._dense.append(_scalars(s.components, s.time, float("nan")))
        return h.seal()

    def __len__(self):
        return len(self.snapshots)


# --------------------------------------------------------------------------- per-component machinery


def _mode(g: Geometry) -> int:
    if isinstance(g, PolyCurve):
        return K.CLOSED_CURVE if g.closed else K.OPEN_CURVE
    if g.closure == AXIS_TO_AXIS:
        return K.AXIS_TO_AXIS
    if g.closure == OFF_AXIS_LOOP:
        return K.OFF_AXIS_LOOP
    raise DegenerateGeometry("open profile segments cannot be flowed")


def _dim(g: Geometry) -> int:
    return 1 if isinstance(g, PolyCurve) else g.n


class _Field:
    """Kernel output and per-step reductions for one component."""

    __slots__ = (
        "H", "nu", "kap", "lam1", "hmin", "area", "volume", "h2", "n",
        "hmax", "maxH", "minH", "amax", "ratio", "rmin", "closed",
    )

    def __init__(self, P, g):
        n = _dim(g)
        out = K.field(P, n, _mode(g), sphere_measure(max(n - 1, 0)), ball_volume(max(n, 1)))
        self.H, self.nu, self.kap, self.lam1, self.hmin, self.area, self.volume, self.h2 = out
        self.n = n
        self.closed = g.closed
        st = K.stats(P, self.H, self.kap, self.lam1, n, g.closed)
        self.hmax, self.maxH, self.minH, self.amax, self.ratio, self.rmin = st

    @property
    def amag(self) -> np.ndarray:
        if self.n == 1:
            return np.abs(self.kap)
        rot = (self.H - self.kap) / (self.n - 1)
        return np.sqrt(self.kap**2 + (self.n - 1) * rot**2)

    def stable_dt(self, cfl: float) -> float:
        if not self.hmin > 0:
            raise DegenerateGeometry("minimal edge length is zero")
        return cfl * self.hmin**2 / (2.0 + self.hmin * self.amax)


def _field(g: Geometry) -> _Field:
    return _Field(np.ascontiguousarray(g.coords), g)


def _rebuild(g: Geometry, P: np.ndarray) -> Geometry:
    if isinstance(g, PolyCurve):
        return PolyCurve._trusted(P, g.closed)
    return AxisymProfile._trusted(P, g.n, g.closure)


def _check(g: Geometry, P: np.ndarray, f: _Field):
    if not (math.isfinite(f.maxH) and math.isfinite(f.hmax)):
        raise DegenerateGeometry("non-finite vertex or curvature")
    if f.hmin < EDGE_EPS:
        raise DegenerateEdge("edge collapsed during the step")
    if isinstance(g, AxisymProfile) and f.rmin <= 0:
        raise AxisViolation("profile crossed the axis")
    if not K.is_simple(P, g.closed):
        raise SelfIntersection("self-intersection after step")


def _needs_remesh(P: np.ndarray, f: _Field, params: EngineParams, spacing: float | None) -> bool:
    if params.resolution is None:
        return f.hmax > params.remesh_ratio * f.hmin
    e = _edge_lengths(P, f.closed)
    a = f.amag
    a_edge = np.maximum(a, np.roll(a, -1))[: len(e)] if f.closed else np.maximum(a[:-1], a[1:])
    want = np.minimum(spacing, params.resolution / np.maximum(a_edge, 1e-300))
    q = e / want
    return q.max() > params.remesh_ratio or q.min() < 1.0 / (2.0 * params.remesh_ratio)


def _remesh(g: Geometry, params: EngineParams, spacing: float | None) -> Geometry:
    if params.resolution is None:
        length = float(np.sum(_edge_lengths(g.coords, g.closed)))
        count = len(g.coords) if g.closed else len(g.coords) - 1
        g2 = resample(g, length / count, check=False)
    else:
        g2 = resample(g, spacing, resolution=params.resolution, grade=params.grade, check=False)
    return _restore_measure(g2, total_area(g))


def _restore_measure(g: Geometry, target: float) -> Geometry:
    """Offset ``g`` along its normal so its measure equals ``target``.

    Resampling changes the chord deficit of the polygon, which would show
    up as a spurious jump in area.  A uniform normal offset
    ``eps = (target - area) / int H`` undoes it to first order; ``eps`` is
    of order ``h^2 |A|``.
    """
    q = quantities(g)
    total_H = float(np.sum(q.H * q.weight))
    if not total_H > 0:
        return g
    eps = (target - total_area(g)) / total_H
    P = g.coords + eps * q.normal
    if not g.closed:
        P[0], P[-1] = g.coords[0], g.coords[-1]
    if isinstance(g, AxisymProfile) and g.closure == AXIS_TO_AXIS:
        P[0, 1] = P[-1, 1] = 0.0
    return _rebuild(g, P)


def _advance(g: Geometry, f: _Field, dt: float, params: EngineParams, spacing):
    """One Euler step of a component; returns ``(geometry, field, remeshed)``."""
    P = K.euler_move(np.ascontiguousarray(g.coords), f.H, f.nu, dt, _mode(g))
    f2 = _Field(P, g)
    _check(g, P, f2)
    g2 = _rebuild(g, P)
    remeshed = False
    if _needs_remesh(P, f2, params, spacing):
        g2 = _remesh(g2, params, spacing)
        f2 = _field(g2)
        remeshed = True
    return g2, f2, remeshed


def _static_scalars(components, time, alpha):
    """Scalars from the geometry layer; also valid for open profile segments."""
    from .geometry import enclosed_volume, quantities, total_area

    qs = [quantities(g) for g in components]
    H = np.concatenate([q.H for q in qs])
    ratio = np.concatenate([q.lambda1[q.H > 0] / q.H[q.H > 0] for q in qs])
    return (
        float(time),
        float(sum(total_area(g) for g in components)),
        float(sum(enclosed_volume(g) for g in components)),
        float(H.max()),
        float(H.min()),
        float(ratio.min()) if len(ratio) else float("nan"),
        float(alpha),
    )


def _scalars(components, time, alpha, fields=None):
    if fields is None:
        if any(isinstance(g, AxisymProfile) and g.closure == OPEN_SEGMENT for g in components):
            return _static_scalars(components, time, alpha)
        fields = [_field(g) for g in components]
    if not fields:
        return (time, 0.0, 0.0, float("nan"), float("nan"), float("nan"), alpha)
    area = 0.0
    vol = 0.0
    for f in fields:
        area += f.area
        vol += f.volume
    maxH = max(f.maxH for f in fields)
    minH = min(f.minH for f in fields)
    ratios = [f.ratio for f in fields if not math.isnan(f.ratio)]
    minl1 = min(ratios) if ratios else float("nan")
    return (float(time), float(area), float(vol), float(maxH), float(minH), float(minl1), float(alpha))


def _alpha(components) -> float:
    from .diagnostics import andrews_quantities

    try:
        return float(min(andrews_quantities(g).alpha for g in components))
    except (GeometryError, NotMeanConvex):
        return float("nan")


# --------------------------------------------------------------------------- public operations


def choose_dt(state: FlowState, cfl: float = 0.4) -> float:
    """Explicit stable step ``cfl * h_min^2 / (2 + h_min * max|H|)``.

    The minimum is taken over all components.
    """
    if not 0 < cfl <= 1:
        raise ValueError("cfl must lie in (0, 1]")
    return min(_field(g).stable_dt(cfl) for g in state.components)


def step(state: FlowState, dt: float, params: EngineParams | None = None) -> FlowState:
    """Advance every component by one explicit Euler step of size ``dt``.

    Vertices move with velocity ``-H nu`` (towards the centre on a sphere);
    the mesh is redistributed when its spacing ratio exceeds the configured
    bound, and simplicity is re-checked.
    """
    params = params or EngineParams()
    fields = [_field(g) for g in state.components]
    limit = min(f.stable_dt(1.0) for f in fields)
    if not 0 < dt <= limit * (1 + 1e-12):
        raise StepTooLarge(f"dt={dt:.3g} exceeds the stability bound {limit:.3g}")
    spacing = params.spacing
    out = []
    for g, f in zip(state.components, fields):
        sp = spacing or float(np.mean(_edge_lengths(g.coords, g.closed)))
        out.append(_advance(g, f, dt, params, sp)[0])
    return state.replace(out, time=state.time + dt, step_index=state.step_index + 1)


def evolve(
    initial: FlowState,
    stop: Sequence[StopCriterion],
    record: int = 1,
    *,
    params: EngineParams | None = None,
    record_times: Sequence[float] = (),
    record_scale: float | None = None,
    history: FlowHistory | None = None,
    seal: bool = True,
) -> FlowHistory:
    """Integrate until the first stop criterion fires.

    Parameters
    ----------
    initial : FlowState
    stop : list of StopCriterion
    record : int
        Keep every ``record``-th step as a snapshot (the first and last
        states and every event are always kept).
    record_times : sequence of float
        Times hit exactly by clipping the step and always recorded.
    record_scale : float, optional
        Additionally record whenever the time since the last snapshot
        exceeds ``record_scale / max H^2`` (fine sampling near singularities).
    history : FlowHistory, optional
        Append to this history instead of starting a new one.

    Returns
    -------
    FlowHistory
        ``status`` is ``"ok"`` or the kind of the failure event.
    """
    params = params or EngineParams()
    stop = list(stop)
    horizon = min((s.value for s in stop if s.kind == "horizon"), default=math.inf)
    ext_tol = min((s.value for s in stop if s.kind == "extinction"), default=None)
    blowup = min((s.value for s in stop if s.kind == "blowup"), default=math.inf)
    trig = min((s.value for s in stop if s.kind == "trigger"), default=math.inf)
    lo_band, hi_band = params.trigger_band
    pending = sorted(t for t in record_times if t > initial.time)

    hist = history if history is not None else FlowHistory()
    comps = list(initial.components)
    ids = list(initial.ids)
    fields = [_field(g) for g in comps]
    spacing = [params.spacing or float(np.mean(_edge_lengths(g.coords, g.closed))) for g in comps]
    area0 = hist.info.setdefault("area0", {})
    for i, f in zip(ids, fields):
        area0.setdefault(i, f.area)
    t = initial.time
    k = initial.step_index
    last_snap = t
    alpha = _alpha(comps) if params.alpha_stride else float("nan")
    dissipation = hist.info.setdefault("dissipation", [])
    hist.add_dense(_scalars(comps, t, alpha, fields))
    dissipation.append(sum(f.h2 for f in fields))

    def state():
        return FlowState(tuple(comps) if len(comps) != 1 or isinstance(initial.geometry, tuple) else comps[0], t, k, tuple(ids))

    def stable():
        return min(f.stable_dt(params.cfl) for f in fields)

    if not hist.snapshots or hist.snapshots[-1].time < t:
        hist.record(state(), stable() if comps else 0.0)

    status = "ok"
    while comps:
        maxH = max(f.maxH for f in fields)
        if maxH >= blowup:
            hist.add_event(t, "blowup_stop", maxH=maxH)
            break
        if maxH >= lo_band * trig:
            hist.add_event(t, "trigger", maxH=maxH)
            break
        if t >= horizon - 1e-15 * max(1.0, abs(horizon)):
            hist.add_event(t, "horizon")
            break
        if k - initial.step_index >= params.max_steps:
            status = "blowup_stop"
            hist.add_event(t, "blowup_stop", reason="max_steps")
            break

        dt = stable()
        target = min([horizon] + pending[:1])
        clipped = t + dt >= target
        if clipped:
            dt = target - t
        try:
            for _ in range(60):
                new = [_advance(g, f, dt, params, sp) for g, f, sp in zip(comps, fields, spacing)]
                newH = max(x[1].maxH for x in new)
                if newH > hi_band * trig:
                    dt *= 0.5
                    clipped = False
                    continue
                break
        except SelfIntersection as exc:
            status = "self_intersection"
            hist.add_event(t, "self_intersection", message=str(exc))
            break
        except GeometryError as exc:
            status = "blowup_stop"
            hist.add_event(t, "blowup_stop", reason=type(exc).__name__, message=str(exc))
            break
        t = target if clipped else t + dt
        k += 1
        comps = [x[0] for x in new]
        fields = [x[1] for x in new]

        gone = []
        if ext_tol is not None:
            for j, (i, f) in enumerate(zip(ids, fields)):
                if f.area <= ext_tol * area0[i]:
                    gone.append(j)
        if params.alpha_stride and (k - initial.step_index) % params.alpha_stride == 0:
            alpha = _alpha(comps)
        else:
            alpha = float("nan")
        hist.add_dense(_scalars(comps, t, alpha, fields))
        dissipation.append(sum(f.h2 for f in fields))

        hit = bool(pending) and t >= pending[0] - 1e-15 * max(1.0, abs(pending[0]))
        while pending and t >= pending[0] - 1e-15 * max(1.0, abs(pending[0])):
            pending.pop(0)
        maxH = max(f.maxH for f in fields)
        due = (k - initial.step_index) % record == 0 or hit or bool(gone)
        if record_scale is not None and t - last_snap >= record_scale / maxH**2:
            due = True
        if due:
            hist.record(state(), stable())
            last_snap = t
        for j in reversed(gone):
            hist.add_event(t, "extinction", component=ids[j], area=float(fields[j].area))
            del comps[j], fields[j], ids[j], spacing[j]
            if comps:
                hist.record(state(), stable())

    final = state()
    last = hist.snapshots[-1]
    if comps and (last.time < t or last.step_index != k or len(last.components) != len(comps)):
        hist.record(final, stable())
    hist.status = status
    hist.info["final_state"] = final
    return hist.seal() if seal else hist


def pair_distance(a: FlowState, b: FlowState) -> float:
    """Minimal distance between two discrete hypersurfaces.

    Segment-to-segment distances are exact for disjoint plane polylines.
    For hypersurfaces of revolution about the same axis the closest points
    lie in a common meridian half-plane, so the profile distance is the
    ambient distance.
    """
    ga, gb = a.components, b.components
    na = {_dim(g) for g in ga}
    nb = {_dim(g) for g in gb}
    if na != nb:
        raise ValueError("flows live in different dimensions")
    best = math.inf
    for g in ga:
        for h in gb:
            a0, a1 = segments(g)
            b0, b1 = segments(h)
            d1 = point_segment_distance(g.coords, b0, b1).min()
            d2 = point_segment_distance(h.coords, a0, a1).min()
            best = min(best, float(d1), float(d2))
    return best


def area_decay_defects(history: FlowHistory) -> np.ndarray:
    """Per-step relative defect of ``dA/dt = -int H^2`` along a run.

    ``defect[k] = |(A[k+1] - A[k]) / dt + I[k]| / I[k]`` with ``I`` the
    integral of ``H^2`` recorded by :func:`evolve` (``info['dissipation']``)
    at the start of step ``k``.  Steps that remove a component are skipped.
    """
    d = history.dense_scalars
    I = np.asarray(history.info.get("dissipation", ()), dtype=float)
    if len(I) != len(d):
        raise ValueError("history carries no per-step dissipation record")
    dt = np.diff(d[:, 0])
    dA = np.diff(d[:, 1])
    keep = (dt > 0) & (d[1:, 1] > 0)
    for e in history.events_of("extinction"):
        keep &= d[1:, 0] != e.time
    return np.abs(dA[keep] / dt[keep] + I[:-1][keep]) / I[:-1][keep]


def area_decay_defect(state: FlowState, dt: float, params: EngineParams | None = None) -> tuple:
    """Relative defect of ``dA/dt = -int H^2`` over one step.

    Returns ``(defect, next_state)`` with
    ``defect = |dA/dt + sum H^2 w| / sum H^2 w`` evaluated at the start of
    the step, the same quadrature the integrator uses for areas.
    """
    from .geometry import quantities, total_area, weights

    a0 = sum(total_area(g) for g in state.components)
    I = sum(float(np.sum(quantities(g).H ** 2 * weights(g))) for g in state.components)
    nxt = step(state, dt, params)
    a1 = sum(total_area(g) for g in nxt.components)
    return abs((a1 - a0) / dt + I) / I, nxt
