"""Flow with surgery for hypersurfaces of revolution.

The outer loop evolves until the largest mean curvature reaches
``H_trig``.  It then looks for almost-cylindrical necks at curvature scale
``H_neck``, cuts a minimal collection of them that separates the trigger
region from the thick part (``H <= H_th``), closes every cut with a rescaled
standard cap, discards the components on which ``H > H_th`` everywhere and
continues with the rest.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateGeometry,
    InsufficientHistory,
    InvalidSpec,
    NeckTooShort,
    NoSeparatingNecks,
    UncontrolledInitialData,
    UncoveredTime,
)
from .flow import EngineParams, FlowHistory, FlowState, StopCriterion, evolve
from .geometry import (
    AXIS_TO_AXIS,
    OFF_AXIS_LOOP,
    AxisymProfile,
    Geometry,
    _three_point,
    quantities,
)

#: Axial length, in units of the neck radius, over which a cap differs from the cylinder.
CAP_LENGTH = 3.0
#: Exponent of the cap profile ``rho^2 = 1 - (1 - z / CAP_LENGTH)^m``.
CAP_EXPONENT = 4
#: Backward slices may be this fraction of ``s^2`` away from the requested time.
BACKWARD_TOL = 0.1
#: Rescaled times sampled by the strong neck test.
NECK_TIMES = (-1.0, -0.5, 0.0)


class SurgeryParamWarning(UserWarning):
    """Parameters outside the regime in which caps are guaranteed to glue."""


@dataclass(frozen=True)
class SurgeryParams:
    """Thresholds of the flow with surgery.

    Parameters
    ----------
    delta : float
        Neck quality, in ``(0, 0.1]``.
    H_th, H_neck, H_trig : float
        Thick-part, neck and trigger curvature; each at least ten times the
        previous one.
    alpha, beta, gamma : float
        Controlled initial data: Andrews constant at least ``alpha``,
        ``(lambda_1 + lambda_2) / H >= beta`` and ``H <= gamma``.
    Gamma : float
        Cap scale; modifications stay inside ``B(center, 5 Gamma s)``.
    mu : float
        Neck radii lie in ``[mu^-1/2, mu^1/2] * s_sharp``.
    """

    delta: float = 0.05
    H_th: float = 10.0
    H_neck: float = 100.0
    H_trig: float = 1000.0
    alpha: float = 0.1
    beta: float = 0.5
    gamma: float = 10.0
    Gamma: float = 20.0
    mu: float = 2.0

    def __post_init__(self):
        if not 0 < self.delta <= 0.1:
            raise InvalidSpec("delta must lie in (0, 0.1]")
        if not 0 < self.H_th:
            raise InvalidSpec("H_th must be positive")
        if self.H_neck < 10 * self.H_th or self.H_trig < 10 * self.H_neck:
            raise InvalidSpec("need H_trig >= 10 H_neck and H_neck >= 10 H_th")
        if not self.Gamma >= 10:
            raise InvalidSpec("Gamma must be at least 10")
        if not self.mu >= 1:
            raise InvalidSpec("mu must be at least 1")
        if not (self.alpha > 0 and self.beta > 0 and self.gamma > 0):
            raise InvalidSpec("alpha, beta and gamma must be positive")
        if self.delta > 1.0 / (10.0 * self.Gamma):
            warnings.warn(
                f"delta={self.delta} exceeds 1/(10 Gamma)={1 / (10 * self.Gamma):.3g}; "
                "caps are glued only inside the verified neck window",
                SurgeryParamWarning,
                stacklevel=3,
            )

    def s_sharp(self, n: int) -> float:
        """Reference neck radius ``(n - 1) / H_neck``."""
        return (n - 1) / self.H_neck


@dataclass(frozen=True)
class NeckRegion:
    """An axial window on which the profile is a strong ``delta``-neck.

    ``center`` is the point on the axis, ``extent`` the inclusive range of
    vertex indices covered by the verified windows and ``quality`` the
    achieved closeness (at most ``delta``).
    """

    center: tuple
    radius: float
    extent: tuple
    quality: float
    component: int = 0
    index: int = 0
    strong: bool = True

    @property
    def center_x(self) -> float:
        return float(self.center[0])


@dataclass(frozen=True)
class DiscardRecord:
    component: int
    topology: str
    min_H: float
    time: float = float("nan")


@dataclass(frozen=True)
class DiscardResult:
    kept: list
    kept_ids: list
    discarded: list


@dataclass(frozen=True)
class CapProfile:
    """Meridian ``(z, rho)`` of the standard cap, tip at ``z = 0``.

    ``rho = 1`` for ``z >= CAP_LENGTH`` up to ``z = Gamma``.
    """

    points: np.ndarray
    Gamma: float

    @staticmethod
    def radius(z):
        """Cap radius at axial distance ``z`` from the tip (unit neck)."""
        u = np.clip(np.asarray(z, dtype=float) / CAP_LENGTH, 0.0, 1.0)
        return np.sqrt(1.0 - (1.0 - u) ** CAP_EXPONENT)

    @staticmethod
    def curvatures(z):
        """Profile and rotational curvature of the unit cap at ``z > 0``."""
        z = np.asarray(z, dtype=float)
        u = np.clip(z / CAP_LENGTH, 0.0, 1.0)
        m = CAP_EXPONENT
        f = 1.0 - (1.0 - u) ** m
        f1 = m * (1.0 - u) ** (m - 1) / CAP_LENGTH
        f2 = -m * (m - 1) * (1.0 - u) ** (m - 2) / CAP_LENGTH**2
        rho = np.sqrt(f)
        d1 = f1 / (2.0 * rho)
        d2 = (2.0 * f * f2 - f1 * f1) / (4.0 * f * rho)
        w = np.sqrt(1.0 + d1 * d1)
        return -d2 / w**3, 1.0 / (rho * w)

    def curvature_bound(self, n: int = 2) -> float:
        """``sup |A|`` of the unit cap hypersurface in dimension ``n``."""
        z = CAP_LENGTH * np.linspace(1e-6, 1.0, 200001) ** 2
        k, rot = self.curvatures(z)
        tip = 2.0 * CAP_LENGTH / CAP_EXPONENT
        vals = np.sqrt(k * k + (n - 1) * rot * rot)
        return float(max(vals.max(), math.sqrt(n) / tip))


def standard_cap_profile(Gamma: float = 20.0, N: int = 256) -> CapProfile:
    """Convex cap closing a unit-radius half-cylinder of length ``Gamma``.

    ``rho(z)^2 = 1 - (1 - z/3)^4`` for ``z <= 3`` and ``rho = 1`` beyond, so
    the cap is ``C^3``, concave as a graph (hence convex) and meets the axis
    orthogonally in a round tip of radius ``2/3``.
    """
    if not Gamma >= 10:
        raise InvalidSpec("Gamma must be at least 10")
    if N < 8:
        raise InvalidSpec("need at least 8 vertices")
    m = N // 2
    v = np.linspace(0.0, 1.0, m + 1)
    z_cap = CAP_LENGTH * v**2
    z_cyl = np.linspace(CAP_LENGTH, Gamma, N - m)[1:]
    z = np.concatenate([z_cap, z_cyl])
    return CapProfile(np.column_stack([z, CapProfile.radius(z)]), float(Gamma))


# --------------------------------------------------------------------------- neck detection


def _profile_derivatives(p: np.ndarray):
    """``(r', r'')`` at interior vertices of a profile (``nan`` at the ends)."""
    kappa, normal = _three_point(p[:-2], p[1:-1], p[2:])
    slope = np.full(len(p), np.nan)
    curv = np.full(len(p), np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = -normal[:, 0] / normal[:, 1]
        slope[1:-1] = d1
        curv[1:-1] = kappa * (1.0 + d1 * d1) ** 1.5
    return slope, curv


def _runs(p: np.ndarray):
    """Maximal index ranges on which ``x`` is strictly monotone."""
    d = np.sign(np.diff(p[:, 0]))
    out = []
    start = 0
    for i in range(1, len(d) + 1):
        if i == len(d) or d[i] != d[start] or d[i] == 0:
            if d[start] != 0:
                out.append((start, i))
            start = i
    return out


class _Slice:
    """Profile data reused by repeated window tests."""

    def __init__(self, g: AxisymProfile):
        self.p = np.asarray(g.coords)
        self.slope, self.curv = _profile_derivatives(self.p)
        self.runs = _runs(self.p)

    def window(self, xc: float, half: float):
        """Vertex indices with ``|x - xc| <= half`` on a monotone run that covers the window."""
        x = self.p[:, 0]
        for a, b in self.runs:
            lo, hi = min(x[a], x[b]), max(x[a], x[b])
            if lo < xc - half and xc + half < hi:
                idx = np.arange(a, b + 1)
                sel = idx[np.abs(x[idx] - xc) <= half]
                if len(sel) >= 3:
                    yield sel

    def quality(self, xc: float, s: float, half: float, scale: float) -> float:
        """Best C^2 closeness over windows at ``xc`` to a cylinder of radius ``scale * s``."""
        best = math.inf
        for sel in self.window(xc, half):
            r = self.p[sel, 1]
            q = max(
                float(np.max(np.abs(r / (scale * s) - 1.0))),
                float(np.nanmax(np.abs(self.slope[sel]))),
                float(np.nanmax(np.abs(s * self.curv[sel]))),
            )
            best = min(best, q)
        return best


def _neck_slices(history: FlowHistory, t: float, s: float):
    out = []
    for tau in NECK_TIMES[:-1]:
        try:
            snap = history.nearest(t + tau * s * s, BACKWARD_TOL * s * s)
        except UncoveredTime as exc:
            raise InsufficientHistory(str(exc)) from None
        out.append((tau, snap))
    return out


def _axisym_components(state: FlowState):
    comps = state.components
    for g in comps:
        if not isinstance(g, AxisymProfile):
            raise DegenerateGeometry("surgery is defined for hypersurfaces of revolution")
    return comps


def detect_necks(history: FlowHistory, t: float, params: SurgeryParams, *, backward: bool = True) -> list:
    """Strong ``delta``-necks at curvature scale ``H_neck`` in the slice at ``t``.

    A vertex is a candidate centre when its mean curvature is within 10% of
    ``H_neck`` and its radius ``s`` lies in the ``mu``-band around
    ``(n - 1) / H_neck``.  It passes when, over the axial window
    ``|x - x_c| <= s / delta``, the scaled radius, slope and second
    derivative satisfy ``|r / s(tau) - 1|``, ``|r'|``, ``|s r''| <= delta``
    at rescaled times ``tau = -1, -1/2, 0`` (``s(tau)`` is the radius of the
    shrinking cylinder).  Passing vertices that are adjacent, or whose
    windows overlap, form one region centred at its middle vertex.

    Raises
    ------
    InsufficientHistory
        If ``backward`` and a backward slice is not recorded.
    """
    snap = history.slice_at(t)
    comps = _axisym_components(snap)
    delta = params.delta
    regions = []
    for ci, g in enumerate(comps):
        n = g.n
        s_sharp = params.s_sharp(n)
        band = (s_sharp / math.sqrt(params.mu), s_sharp * math.sqrt(params.mu))
        H = quantities(g).H
        sl = _Slice(g)
        p = sl.p
        cand = np.where(
            (np.abs(H / params.H_neck - 1.0) <= 0.1) & (p[:, 1] >= band[0]) & (p[:, 1] <= band[1])
        )[0]
        passed = []
        cache = {}
        for i in cand:
            s = float(p[i, 1])
            xc = float(p[i, 0])
            half = s / delta
            q = sl.quality(xc, s, half, 1.0)
            if q > delta:
                continue
            if backward:
                for tau, back in _neck_slices(history, snap.time, s):
                    key = id(back)
                    slices = cache.get(key)
                    if slices is None:
                        slices = cache[key] = [_Slice(h) for h in _axisym_components(back)]
                    scale = math.sqrt(1.0 - 2.0 * (n - 1) * tau)
                    q = max(q, min(b.quality(xc, s, half, scale) for b in slices))
                    if q > delta:
                        break
                if q > delta:
                    continue
            win = next(sl.window(xc, half))
            passed.append((int(i), q, int(win[0]), int(win[-1])))
        # group passing vertices whose windows overlap
        groups = []
        for item in passed:
            if groups and item[2] <= groups[-1][-1][3] + 1 and item[0] > groups[-1][-1][0]:
                groups[-1].append(item)
            else:
                groups.append([item])
        for grp in groups:
            mid = grp[len(grp) // 2]
            i = mid[0]
            lo = min(it[2] for it in grp)
            hi = max(it[3] for it in grp)
            regions.append(
                NeckRegion(
                    center=(float(p[i, 0]), 0.0),
                    radius=float(p[i, 1]),
                    extent=(lo, hi),
                    quality=float(mid[1]),
                    component=ci,
                    index=i,
                    strong=backward,
                )
            )
    return regions


# --------------------------------------------------------------------------- separation


def _hot_cold(g: Geometry, params: SurgeryParams):
    H = quantities(g).H
    return H >= 0.99 * params.H_trig, H <= params.H_th


def separation_check(geometry: AxisymProfile, necks, params: SurgeryParams) -> bool:
    """True iff cutting at the neck centres disconnects every trigger vertex from the thick part.

    Paths run along the profile; a closed loop is cut into arcs.
    """
    hot, cold = _hot_cold(geometry, params)
    if not hot.any() or not cold.any():
        return True
    N = len(hot)
    cuts = sorted({int(nk.index) for nk in necks})
    labels = np.zeros(N, dtype=int)
    for c in cuts:
        labels[c + 1 :] += 1
    if geometry.closed and cuts:
        # the arc after the last cut joins the arc before the first
        labels[labels == len(cuts)] = 0
    for lab in np.unique(labels):
        part = labels == lab
        # the cut vertex itself belongs to the neck and is not on either side
        part[cuts] = False
        if (hot & part).any() and (cold & part).any():
            return False
    return True


def select_necks(geometry: AxisymProfile, necks, params: SurgeryParams) -> list:
    """Minimal separating sub-collection, keeping leftmost necks preferentially.

    Necks are tried for removal from right to left; one that is not needed
    for separation is dropped.  The result is minimal: removing any single
    neck breaks separation.
    """
    chosen = sorted(necks, key=lambda nk: nk.center_x)
    if not separation_check(geometry, chosen, params):
        raise NoSeparatingNecks("the detected necks do not separate the trigger region")
    for nk in sorted(chosen, key=lambda nk: -nk.center_x):
        trial = [m for m in chosen if m is not nk]
        if separation_check(geometry, trial, params):
            chosen = trial
    return chosen


def is_minimal(geometry: AxisymProfile, necks, params: SurgeryParams) -> bool:
    """Every neck is needed: dropping any single one breaks separation."""
    if not separation_check(geometry, necks, params):
        return False
    return all(not separation_check(geometry, [m for m in necks if m is not nk], params) for nk in necks)


# --------------------------------------------------------------------------- cap replacement


def _cap_points(xc: float, s: float, direction: float, r_pre, m: int = 48) -> np.ndarray:
    """Cap vertices from the junction (``z = L``) to the tip (``z = 0``)."""
    Lc = CAP_LENGTH * s
    v = np.linspace(1.0, 0.0, m + 1)
    z = Lc * v * v
    x = xc + direction * z
    r = r_pre(x) * CapProfile.radius(z / s)
    r[-1] = 0.0
    return np.column_stack([x, r])


def _cut_edge(p: np.ndarray, xc: float, i: int) -> int:
    """Index ``j`` nearest ``i`` with ``xc`` between ``x[j]`` and ``x[j + 1]``."""
    x = p[:, 0]
    for k in range(len(p)):
        for j in (i - k, i + k - 1):
            if 0 <= j < len(p) - 1 and (x[j] - xc) * (x[j + 1] - xc) <= 0 and x[j] != x[j + 1]:
                return j
    raise DegenerateGeometry("the neck centre is not crossed by the profile")


def _graph_span(p: np.ndarray, j: int, direction: float) -> tuple:
    """Largest index range around edge ``j`` on which ``x`` moves monotonically in ``direction``."""
    d = direction * (p[:-1, 0] - p[1:, 0])
    a = j
    while a > 0 and d[a - 1] > 0:
        a -= 1
    b = j
    while b < len(d) - 1 and d[b + 1] > 0:
        b += 1
    return a, b + 1


def replace_neck(geometry: AxisymProfile, neck: NeckRegion, params: SurgeryParams) -> list:
    """Cut the neck at its centre and close both sides with rescaled standard caps.

    The pre-surgery radius is multiplied by the unit cap profile over an
    axial distance ``CAP_LENGTH * s`` on each side of the cut, so the new
    solid is contained in the old one and every vertex farther than that from
    the centre is kept bitwise.  A loop cut once becomes a single ball.

    Raises
    ------
    NeckTooShort
        If the profile is not a graph over both caps.
    """
    if not isinstance(geometry, AxisymProfile) or geometry.closure not in (AXIS_TO_AXIS, OFF_AXIS_LOOP):
        raise DegenerateGeometry("caps need a closed hypersurface of revolution")
    p = np.asarray(geometry.coords)
    s = float(neck.radius)
    xc = neck.center_x
    Lc = CAP_LENGTH * s
    loop = geometry.closure == OFF_AXIS_LOOP
    i0 = int(neck.index)
    if loop:
        # open the loop opposite the neck so the cut edge is interior
        shift = (i0 + len(p) // 2) % len(p)
        p = np.vstack([np.roll(p, -shift, axis=0), np.roll(p, -shift, axis=0)[:1]])
        i0 = (i0 - shift) % (len(p) - 1)
    j = _cut_edge(p, xc, i0)
    direction = math.copysign(1.0, p[j, 0] - p[j + 1, 0])
    a, b = _graph_span(p, j, direction)
    if direction * (p[a, 0] - xc) < Lc or direction * (xc - p[b, 0]) < Lc:
        raise NeckTooShort(f"the profile is not a graph over [{xc - Lc:.4g}, {xc + Lc:.4g}]")
    span = p[a : b + 1][::-1] if direction > 0 else p[a : b + 1]

    def r_pre(x):
        return np.interp(x, span[:, 0], span[:, 1])

    xs = p[:, 0]
    first = p[: j + 1][direction * (xs[: j + 1] - xc) >= Lc]
    second = p[j + 1 :][-direction * (xs[j + 1 :] - xc) >= Lc]
    piece_a = np.vstack([first, _dedupe(first[-1:], _cap_points(xc, s, direction, r_pre))])
    piece_b = np.vstack([_dedupe(second[:1], _cap_points(xc, s, -direction, r_pre)[::-1], tail=True), second])
    if loop:
        # the far side is shared: walk tip -> far side -> tip
        pts = np.vstack([piece_b, piece_a[1:]]) if np.array_equal(piece_b[-1], piece_a[0]) else np.vstack([piece_b, piece_a])
        return [AxisymProfile(pts, n=geometry.n, closure=AXIS_TO_AXIS)]
    return [
        AxisymProfile(piece_a, n=geometry.n, closure=AXIS_TO_AXIS),
        AxisymProfile(piece_b, n=geometry.n, closure=AXIS_TO_AXIS),
    ]


def _dedupe(anchor: np.ndarray, cap: np.ndarray, tail: bool = False) -> np.ndarray:
    """Drop the cap junction vertex if it coincides with the adjacent kept vertex."""
    if len(anchor) == 0:
        return cap
    end = cap[-1] if tail else cap[0]
    if np.hypot(*(end - anchor[0])) < 1e-12:
        return cap[:-1] if tail else cap[1:]
    return cap


def surgery_report(before: AxisymProfile, after: list, neck: NeckRegion, params: SurgeryParams) -> dict:
    """Containment, locality and cap curvature of one replacement.

    ``containment`` is ``max(r_post - r_pre)`` over new vertices in the
    modified range (``<= 1e-9`` required); ``locality`` is true when every
    old vertex outside ``B(center, 5 Gamma s)`` survives bitwise;
    ``cap_curvature`` is ``s * sup |A|`` over new vertices.
    """
    p = np.asarray(before.coords)
    s = neck.radius
    xc = neck.center_x
    ball = 5.0 * params.Gamma * s
    old = {tuple(v) for v in p.tolist()}
    new_pts = np.vstack([np.asarray(g.coords) for g in after])
    new_set = {tuple(v) for v in new_pts.tolist()}
    far = np.hypot(p[:, 0] - xc, p[:, 1]) > ball
    locality = all(tuple(v) in new_set for v in p[far].tolist())
    worst = -math.inf
    curv = 0.0
    lo, hi = neck.extent
    win = p[lo : hi + 1]
    k = np.argsort(win[:, 0])
    for g in after:
        q = np.asarray(g.coords)
        fresh = np.array([tuple(v) not in old for v in q.tolist()])
        if not fresh.any():
            continue
        pts = q[fresh]
        inside = np.abs(pts[:, 0] - xc) <= CAP_LENGTH * s * (1 + 1e-12)
        r_pre = np.interp(pts[inside, 0], win[k, 0], win[k, 1])
        if inside.any():
            worst = max(worst, float(np.max(pts[inside, 1] - r_pre)))
        qq = quantities(g)
        curv = max(curv, float(np.sqrt(qq.A_norm_sq[fresh]).max()) * s)
    return {"containment": worst, "locality": bool(locality), "cap_curvature": curv}


# --------------------------------------------------------------------------- discarding


def _topology(g: Geometry) -> str:
    if isinstance(g, AxisymProfile) and g.closure == OFF_AXIS_LOOP:
        return "solid_torus"
    return "ball"


def discard_components(components, params: SurgeryParams, ids=None, time: float = float("nan")) -> DiscardResult:
    """Drop exactly the components on which ``H > H_th`` everywhere."""
    components = list(components)
    ids = list(range(len(components))) if ids is None else list(ids)
    kept, kept_ids, gone = [], [], []
    for i, g in zip(ids, components):
        minH = float(quantities(g).H.min())
        if minH > params.H_th:
            gone.append(DiscardRecord(int(i), _topology(g), minH, float(time)))
        else:
            kept.append(g)
            kept_ids.append(i)
    return DiscardResult(kept, kept_ids, gone)


# --------------------------------------------------------------------------- outer loop


def check_controlled(geometry: AxisymProfile, params: SurgeryParams) -> dict:
    """Measure the controlled-initial-data conditions; raise if any fails."""
    from .diagnostics import andrews_quantities

    q = quantities(geometry)
    if q.H.min() <= 0:
        raise UncontrolledInitialData("initial data is not mean convex")
    lam = q.lam
    two = lam[:, 0] + (lam[:, 1] if lam.shape[1] > 1 else 0.0)
    ratio = float((two / q.H).min())
    maxH = float(q.H.max())
    alpha = andrews_quantities(geometry).alpha
    out = {"maxH": maxH, "two_convexity": ratio, "alpha": alpha}
    if maxH > params.gamma:
        raise UncontrolledInitialData(f"max H = {maxH:.4g} exceeds gamma = {params.gamma}")
    if ratio < params.beta:
        raise UncontrolledInitialData(f"(lambda1 + lambda2)/H = {ratio:.4g} is below beta = {params.beta}")
    if alpha < params.alpha:
        raise UncontrolledInitialData(f"Andrews constant {alpha:.4g} is below alpha = {params.alpha}")
    return out


@dataclass
class SurgeryLog:
    """Per-event diagnostics kept in ``history.info['surgeries']``."""

    time: float
    necks: list
    reports: list = field(default_factory=list)
    minimal: bool = True
    separated: bool = True
    maxH: float = float("nan")


def _cut(g: AxisymProfile, necks: list, params: SurgeryParams):
    """Apply several cuts to one component; returns pieces and reports."""
    pieces = [g]
    reports = []
    for nk in sorted(necks, key=lambda m: -m.center_x):
        target = None
        for k, piece in enumerate(pieces):
            p = piece.coords
            d = np.hypot(p[:, 0] - nk.center_x, p[:, 1] - nk.radius)
            i = int(np.argmin(d))
            if d[i] <= 2.0 * nk.radius and (target is None or d[i] < target[2]):
                target = (k, i, d[i])
        if target is None:
            raise DegenerateGeometry("neck not found on any piece")
        k, i, _ = target
        piece = pieces[k]
        p = piece.coords
        # re-express the extent on this piece
        Lw = nk.radius / params.delta
        run = np.where(np.abs(p[:, 0] - nk.center_x) <= Lw)[0]
        run = run[np.abs(run - i) <= len(p)]
        sub = NeckRegion(nk.center, nk.radius, (int(run.min()), int(run.max())), nk.quality, nk.component, i, nk.strong)
        out = replace_neck(piece, sub, params)
        reports.append(surgery_report(piece, out, sub, params))
        pieces[k : k + 1] = out
    return pieces, reports


def surgery_flow(
    initial: FlowState,
    params: SurgeryParams,
    horizon: float = math.inf,
    *,
    engine: EngineParams | None = None,
    extinction: float = 1e-4,
    record: int = 10**9,
    record_scale: float = 0.01,
    max_surgeries: int = 1000,
) -> FlowHistory:
    """Flow with surgery until every component is extinct or ``horizon`` is reached.

    Surgery and discarding happen only at trigger times, when the largest
    mean curvature lies within ``[0.99, 1.01] * H_trig``.  Snapshots are
    recorded at least every ``record_scale / max H^2`` so necks can be
    verified backwards in time.

    Returns
    -------
    FlowHistory
        ``info['surgeries']`` holds one :class:`SurgeryLog` per surgery event,
        ``info['discards']`` the :class:`DiscardRecord` list and
        ``info['assertions']`` the standing checks.

    Raises
    ------
    NoSeparatingNecks
        With ``exc.dump`` holding the history so far and the offending
        component.
    """
    engine = engine or EngineParams(resolution=0.1)
    comps = _axisym_components(initial)
    for g in comps:
        check_controlled(g, params)
    stops = [StopCriterion.trigger(params.H_trig), StopCriterion.extinction(extinction)]
    if math.isfinite(horizon):
        stops.append(StopCriterion.horizon(horizon))
    hist = FlowHistory()
    hist.info["surgeries"] = []
    hist.info["discards"] = []
    state = initial
    next_id = max(initial.ids) + 1
    count = 0
    while True:
        evolve(state, stops, record, params=engine, record_scale=record_scale, history=hist, seal=False)
        final = hist.info["final_state"]
        if hist.status != "ok" or not final.components:
            break
        last = hist.events[-1] if hist.events else None
        if last is None or last.kind != "trigger" or last.time != final.time:
            break
        t = final.time
        comps = list(final.components)
        ids = list(final.ids)
        try:
            necks = detect_necks(hist, t, params)
        except InsufficientHistory as exc:
            hist.add_event(t, "neck_warning", reason="final-time detection", message=str(exc))
            necks = detect_necks(hist, t, params, backward=False)
        new_comps, new_ids = [], []
        log = SurgeryLog(t, [], maxH=float(last.payload.get("maxH", float("nan"))))
        for ci, (i, g) in enumerate(zip(ids, comps)):
            hot, cold = _hot_cold(g, params)
            mine = [nk for nk in necks if nk.component == ci]
            if not (hot.any() and cold.any()):
                new_comps.append(g)
                new_ids.append(i)
                continue
            try:
                chosen = select_necks(g, mine, params)
            except NoSeparatingNecks:
                dump = {
                    "time": t,
                    "component": i,
                    "maxH": float(quantities(g).H.max()),
                    "candidates": mine,
                    "geometry": g,
                    "history": hist.seal(),
                }
                hist.status = "no_separating_necks"
                raise NoSeparatingNecks(
                    f"t={t:.6g}: {len(mine)} candidate neck(s) on component {i} do not separate "
                    f"H >= {0.99 * params.H_trig:g} from H <= {params.H_th:g}",
                    dump=dump,
                ) from None
            log.minimal = log.minimal and is_minimal(g, chosen, params)
            log.separated = log.separated and separation_check(g, chosen, params)
            pieces, reports = _cut(g, chosen, params)
            log.necks.extend(chosen)
            log.reports.extend(reports)
            for piece in pieces:
                new_comps.append(piece)
                new_ids.append(next_id)
                next_id += 1
        result = discard_components(new_comps, params, new_ids, t)
        if log.necks:
            count += 1
            hist.add_event(
                t,
                "surgery",
                center_x=";".join(repr(nk.center_x) for nk in log.necks),
                radius=";".join(repr(nk.radius) for nk in log.necks),
                quality=";".join(repr(nk.quality) for nk in log.necks),
                components_after=len(result.kept),
            )
            hist.info["surgeries"].append(log)
        for rec in result.discarded:
            hist.add_event(t, "discard", component=rec.component, topology=rec.topology, minH=rec.min_H)
            hist.info["discards"].append(rec)
        if not log.necks and not result.discarded:
            raise NoSeparatingNecks(f"t={t:.6g}: trigger fired but nothing can be cut or discarded", dump={"time": t})
        state = FlowState(tuple(result.kept), t, final.step_index, tuple(result.kept_ids))
        if not result.kept:
            hist.info["final_state"] = state
            break
        hist.record(state, 0.0)
        if count > max_surgeries:
            raise NoSeparatingNecks("too many surgeries", dump={"time": t})
    hist.info["assertions"] = _standing(hist, params)
    return hist.seal()


def _standing(hist: FlowHistory, params: SurgeryParams) -> dict:
    maxH = float(np.nanmax(hist.column("maxH"))) if len(hist.dense_scalars) else float("nan")
    worst = math.inf
    for snap in hist.snapshots:
        for g in snap.components:
            q = quantities(g)
            lam = q.lam
            if lam.shape[1] < 2:
                continue
            worst = min(worst, float(((lam[:, 0] + lam[:, 1]) / q.H).min()))
    return {
        "maxH": maxH,
        "maxH_ok": bool(maxH <= 1.01 * params.H_trig),
        "two_convexity": worst,
        "two_convexity_ok": bool(worst >= params.beta * (1 - 0.05)),
    }


__all__ = [
    "SurgeryParams",
    "SurgeryParamWarning",
    "NeckRegion",
    "DiscardRecord",
    "DiscardResult",
    "CapProfile",
    "SurgeryLog",
    "standard_cap_profile",
    "detect_necks",
    "separation_check",
    "select_necks",
    "is_minimal",
    "replace_neck",
    "surgery_report",
    "discard_components",
    "check_controlled",
    "surgery_flow",
]
