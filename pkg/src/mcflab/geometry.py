"""Discrete hypersurfaces and their pointwise geometry.

Two representations are supported:

* :class:`PolyCurve` -- a plane polygon (closed loop or open graph segment),
  the ``n = 1`` hypersurface.
* :class:`AxisymProfile` -- a profile curve in the half plane ``{(x, r): r >= 0}``
  which, rotated about the ``x`` axis, sweeps out a hypersurface of revolution
  in ``R^(n+1)``.

Orientation is normalised so that the closed curve (or the profile closed
along the axis) runs counterclockwise; the outward normal is then the
tangent rotated clockwise and convex arcs carry positive curvature.  The
mean curvature vector is ``-H * normal``, so round spheres shrink.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np
import shapely
from scipy.interpolate import CubicSpline
from scipy.spatial import ConvexHull, QhullError
from scipy.special import gammaln

from .errors import (
    AxisViolation,
    DegenerateEdge,
    GeometryError,
    OffAxisCenter,
    SelfIntersection,
    TooCoarse,
)

MIN_VERTICES = 8
EDGE_EPS = 1e-12

AXIS_TO_AXIS = "axis_to_axis"
OFF_AXIS_LOOP = "off_axis_loop"
OPEN_SEGMENT = "open_segment"


@lru_cache(maxsize=None)
def sphere_measure(k: int) -> float:
    """Area of the unit sphere ``S^k`` in ``R^(k+1)``."""
    return float(2.0 * math.exp(0.5 * (k + 1) * math.log(math.pi) - gammaln(0.5 * (k + 1))))


@lru_cache(maxsize=None)
def ball_volume(n: int) -> float:
    """Volume ``omega_n`` of the unit ball in ``R^n``."""
    return float(math.exp(0.5 * n * math.log(math.pi) - gammaln(0.5 * n + 1.0)))


def _edge_lengths(points: np.ndarray, closed: bool) -> np.ndarray:
    if closed:
        d = np.roll(points, -1, axis=0) - points
    else:
        d = np.diff(points, axis=0)
    return np.hypot(d[:, 0], d[:, 1])


def signed_area(points: np.ndarray) -> float:
    """Shoelace area of the closed polygon through ``points``."""
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def is_simple(points: np.ndarray, closed: bool) -> bool:
    """True if the polyline (or polygon) has no self-intersections."""
    if closed:
        return bool(shapely.is_simple(shapely.linearrings(points)))
    return bool(shapely.is_simple(shapely.linestrings(points)))


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class PolyCurve:
    """Embedded plane polygon.

    Parameters
    ----------
    vertices : array-like of shape (N, 2)
        Vertex coordinates.  Closed curves carry an implicit edge from the
        last vertex back to the first.
    closed : bool, default=True
        ``False`` for open graph segments (e.g. the grim reaper).  Open
        curves keep the given vertex order.
    """

    vertices: np.ndarray
    closed: bool = True

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise GeometryError(f"vertices must have shape (N, 2), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise GeometryError("vertices must be finite")
        if len(v) < MIN_VERTICES:
            raise GeometryError(f"need at least {MIN_VERTICES} vertices, got {len(v)}")
        if _edge_lengths(v, self.closed).min() < EDGE_EPS:
            raise DegenerateEdge("consecutive vertices coincide")
        if self.closed and signed_area(v) < 0:
            v = np.roll(v[::-1], 1, axis=0)
        if not is_simple(v, self.closed):
            raise SelfIntersection("curve is not simple")
        object.__setattr__(self, "vertices", _freeze(v))

    @classmethod
    def _trusted(cls, vertices: np.ndarray, closed: bool = True) -> "PolyCurve":
        obj = object.__new__(cls)
        object.__setattr__(obj, "vertices", _freeze(np.asarray(vertices, dtype=float)))
        object.__setattr__(obj, "closed", closed)
        return obj

    @property
    def coords(self) -> np.ndarray:
        return self.vertices

    @property
    def n(self) -> int:
        return 1

    @property
    def kind(self) -> str:
        return "curve" if self.closed else "curve-open"

    @property
    def orientation(self) -> str:
        return "ccw"

    def __len__(self) -> int:
        return len(self.vertices)

    def with_coords(self, coords: np.ndarray) -> "PolyCurve":
        return PolyCurve(coords, closed=self.closed)


@dataclass(frozen=True, eq=False)
class AxisymProfile:
    """Profile of a hypersurface of revolution about the ``x`` axis.

    Parameters
    ----------
    points : array-like of shape (N, 2)
        Profile points ``(x, r)`` with ``r >= 0``.
    n : int
        Dimension of the hypersurface (ambient space ``R^(n+1)``), ``n >= 2``.
    closure : {"axis_to_axis", "off_axis_loop", "open_segment"}
        ``axis_to_axis`` profiles start and end on the axis and generate
        spheres; ``off_axis_loop`` profiles are closed loops in ``r > 0``
        and generate tori ``S^1 x S^(n-1)``.  ``open_segment`` is an open
        piece in ``r > 0`` (a truncated cylinder, say); it supports the
        pointwise quantities but not the flow.
    """

    points: np.ndarray
    n: int = 2
    closure: str = AXIS_TO_AXIS

    def __post_init__(self):
        p = np.array(self.points, dtype=float)
        if p.ndim != 2 or p.shape[1] != 2:
            raise GeometryError(f"points must have shape (N, 2), got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise GeometryError("points must be finite")
        if int(self.n) != self.n or self.n < 2:
            raise GeometryError(f"ambient_n must be an integer >= 2, got {self.n}")
        if self.closure not in (AXIS_TO_AXIS, OFF_AXIS_LOOP, OPEN_SEGMENT):
            raise GeometryError(f"unknown closure {self.closure!r}")
        if len(p) < MIN_VERTICES:
            raise GeometryError(f"need at least {MIN_VERTICES} vertices, got {len(p)}")
        loop = self.closure == OFF_AXIS_LOOP
        if _edge_lengths(p, loop).min() < EDGE_EPS:
            raise DegenerateEdge("consecutive profile points coincide")
        if np.any(p[:, 1] < -EDGE_EPS):
            raise AxisViolation("profile has r < 0")
        if self.closure != AXIS_TO_AXIS:
            if np.any(p[:, 1] <= 0):
                raise AxisViolation("off-axis profile touches the axis")
        else:
            if abs(p[0, 1]) > EDGE_EPS or abs(p[-1, 1]) > EDGE_EPS:
                raise AxisViolation("axis_to_axis profile must start and end on the axis")
            p[0, 1] = 0.0
            p[-1, 1] = 0.0
            if np.any(p[1:-1, 1] <= 0):
                raise AxisViolation("profile touches the axis in its interior")
            if p[1, 1] <= 1e-3 * abs(p[1, 0] - p[0, 0]) or p[-2, 1] <= 1e-3 * abs(p[-2, 0] - p[-1, 0]):
                raise AxisViolation("profile must meet the axis transversally")
        closing = p if self.closure != OPEN_SEGMENT else np.vstack([p, [[p[-1, 0], 0.0], [p[0, 0], 0.0]]])
        if signed_area(closing) < 0:
            p = p[::-1].copy() if not loop else np.roll(p[::-1], 1, axis=0)
        if not is_simple(p, loop):
            raise SelfIntersection("profile is not simple")
        object.__setattr__(self, "points", _freeze(p))
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def _trusted(cls, points: np.ndarray, n: int, closure: str) -> "AxisymProfile":
        obj = object.__new__(cls)
        object.__setattr__(obj, "points", _freeze(np.asarray(points, dtype=float)))
        object.__setattr__(obj, "n", int(n))
        object.__setattr__(obj, "closure", closure)
        return obj

    @property
    def coords(self) -> np.ndarray:
        return self.points

    @property
    def ambient_n(self) -> int:
        return self.n

    @property
    def closed(self) -> bool:
        """True when the profile itself is a closed loop."""
        return self.closure == OFF_AXIS_LOOP

    @property
    def kind(self) -> str:
        return {AXIS_TO_AXIS: "axisym-open", OFF_AXIS_LOOP: "axisym-loop"}.get(self.closure, "axisym-segment")

    def __len__(self) -> int:
        return len(self.points)

    def with_coords(self, coords: np.ndarray) -> "AxisymProfile":
        return AxisymProfile(coords, n=self.n, closure=self.closure)


Geometry = Union[PolyCurve, AxisymProfile]


@dataclass(frozen=True)
class SpacetimePoint:
    """A point ``(x0, t0)`` in space-time.

    For axisymmetric geometry ``x0`` is given in meridian coordinates
    ``(x, rho)`` where ``rho >= 0`` is the distance from the axis.
    """

    x0: tuple
    t0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x0", tuple(float(c) for c in np.ravel(self.x0)))
        object.__setattr__(self, "t0", float(self.t0))

    @property
    def xy(self) -> np.ndarray:
        return np.asarray(self.x0, dtype=float)


@dataclass(frozen=True, eq=False)
class QuantityField:
    """Per-vertex geometric data.

    ``lam`` holds the principal curvatures sorted ascending along axis 1;
    ``H`` and ``A_norm_sq`` are computed from it, so ``H == lam.sum(1)``
    holds exactly.
    """

    normal: np.ndarray
    lam: np.ndarray
    H: np.ndarray
    A_norm_sq: np.ndarray
    weight: np.ndarray

    @property
    def lambda1(self) -> np.ndarray:
        return self.lam[:, 0]

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.weight))


def _mirror(p: np.ndarray) -> np.ndarray:
    return np.array([p[0], -p[1]])


def _three_point(a: np.ndarray, p: np.ndarray, b: np.ndarray):
    """Signed circumscribed-circle curvature and outward normal at ``p``.

    The tangent ``(h1/h2)(b-p) + (h2/h1)(p-a)`` is the exact tangent of the
    circle through the three points, so the normal is second-order accurate
    on non-uniform samplings too.
    """
    e1 = p - a
    e2 = b - p
    h1 = np.hypot(e1[:, 0], e1[:, 1])
    h2 = np.hypot(e2[:, 0], e2[:, 1])
    e3 = b - a
    h3 = np.hypot(e3[:, 0], e3[:, 1])
    if min(h1.min(), h2.min()) < EDGE_EPS:
        raise DegenerateEdge("edge shorter than 1e-12")
    cross = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    kappa = 2.0 * cross / (h1 * h2 * h3)
    t = (h1 / h2)[:, None] * e2 + (h2 / h1)[:, None] * e1
    t /= np.hypot(t[:, 0], t[:, 1])[:, None]
    normal = np.column_stack([t[:, 1], -t[:, 0]])
    return kappa, normal


def _open_end(p_end: np.ndarray, p_next: np.ndarray, t_next: np.ndarray) -> np.ndarray:
    """Outward normal at an open endpoint from the tangent at its neighbour.

    A chord makes equal angles with the circle tangents at both of its ends,
    so reflecting the neighbour tangent through the chord is exact on circles.
    """
    u = p_next - p_end
    u = u / np.hypot(*u)
    t0 = 2.0 * np.dot(t_next, u) * u - t_next
    return np.array([t0[1], -t0[0]])


def _open_three_point(v: np.ndarray):
    """Curvature and normal along an open polyline, ends extrapolated."""
    ki, ni = _three_point(v[:-2], v[1:-1], v[2:])
    e = _edge_lengths(v, False)
    if e.min() < EDGE_EPS:
        raise DegenerateEdge("edge shorter than 1e-12")
    k0 = ki[0] + (ki[0] - ki[1]) * e[0] / e[1]
    k1 = ki[-1] + (ki[-1] - ki[-2]) * e[-1] / e[-2]
    kappa = np.concatenate([[k0], ki, [k1]])
    t_first = np.array([-ni[0, 1], ni[0, 0]])
    t_last = np.array([-ni[-1, 1], ni[-1, 0]])
    n0 = _open_end(v[0], v[1], t_first)
    n1 = -_open_end(v[-1], v[-2], -t_last)
    return kappa, np.vstack([n0, ni, n1])


def _vertex_weights(points: np.ndarray, closed: bool) -> np.ndarray:
    e = _edge_lengths(points, closed)
    if closed:
        return 0.5 * (e + np.roll(e, 1))
    w = np.zeros(len(points))
    w[:-1] += 0.5 * e
    w[1:] += 0.5 * e
    return w


def curve_quantities(curve: PolyCurve) -> QuantityField:
    """Curvature, outward normal and length weights of a plane polygon.

    ``H = lambda_1`` is the circumscribed-circle curvature at each vertex,
    positive on convex arcs.  On open curves the end values are linearly
    extrapolated in arclength from the two nearest interior vertices.
    """
    v = curve.vertices
    if curve.closed:
        kappa, normal = _three_point(np.roll(v, 1, axis=0), v, np.roll(v, -1, axis=0))
    else:
        kappa, normal = _open_three_point(v)
    lam = kappa[:, None]
    return QuantityField(
        normal=normal,
        lam=lam,
        H=lam.sum(axis=1),
        A_norm_sq=(lam * lam).sum(axis=1),
        weight=_vertex_weights(v, curve.closed),
    )


def axisym_quantities(profile: AxisymProfile) -> QuantityField:
    """Principal curvatures of a hypersurface of revolution.

    The profile curvature has multiplicity one; the rotational curvature
    ``normal_r / r`` has multiplicity ``n - 1`` and is replaced by the profile
    curvature at the poles, where smooth hypersurfaces of revolution are
    umbilic.  Weights include the orbit factor ``|S^(n-1)| r^(n-1)``.
    """
    p = profile.points
    n = profile.n
    if profile.closure == AXIS_TO_AXIS:
        a = np.vstack([_mirror(p[1]), p[:-1]])
        b = np.vstack([p[1:], _mirror(p[-2])])
        kappa, normal = _three_point(a, p, b)
        r = p[:, 1]
        rot = np.empty_like(kappa)
        rot[1:-1] = normal[1:-1, 1] / r[1:-1]
        rot[0] = kappa[0]
        rot[-1] = kappa[-1]
        base = _vertex_weights(p, False)
    elif profile.closure == OPEN_SEGMENT:
        kappa, normal = _open_three_point(p)
        r = p[:, 1]
        rot = normal[:, 1] / r
        base = _vertex_weights(p, False)
    else:
        kappa, normal = _three_point(np.roll(p, 1, axis=0), p, np.roll(p, -1, axis=0))
        r = p[:, 1]
        rot = normal[:, 1] / r
        base = _vertex_weights(p, True)
    lam = np.sort(np.column_stack([kappa] + [rot] * (n - 1)), axis=1)
    return QuantityField(
        normal=normal,
        lam=lam,
        H=lam.sum(axis=1),
        A_norm_sq=(lam * lam).sum(axis=1),
        weight=base * sphere_measure(n - 1) * r ** (n - 1),
    )


def quantities(geometry: Geometry) -> QuantityField:
    if isinstance(geometry, PolyCurve):
        return curve_quantities(geometry)
    return axisym_quantities(geometry)


def weights(geometry: Geometry) -> np.ndarray:
    """Discrete area element at each vertex."""
    if isinstance(geometry, PolyCurve):
        return _vertex_weights(geometry.vertices, geometry.closed)
    p = geometry.points
    base = _vertex_weights(p, geometry.closed)
    return base * sphere_measure(geometry.n - 1) * p[:, 1] ** (geometry.n - 1)


def total_area(geometry: Geometry) -> float:
    """n-dimensional measure of the hypersurface (perimeter for curves)."""
    return float(np.sum(weights(geometry)))


def enclosed_volume(geometry: Geometry) -> float:
    """(n+1)-volume of the enclosed region.

    Exact for the polygon (respectively the solid of revolution of the
    profile polygon).  Open curves and open segments enclose nothing and
    return ``nan``.
    """
    if isinstance(geometry, PolyCurve):
        if not geometry.closed:
            return float("nan")
        return signed_area(geometry.vertices)
    if geometry.closure == OPEN_SEGMENT:
        return float("nan")
    p = geometry.points
    n = geometry.n
    q = np.vstack([p, p[:1]]) if geometry.closed else p
    x1, x2 = q[:-1, 0], q[1:, 0]
    r1, r2 = q[:-1, 1], q[1:, 1]
    # integral of r^n over a linear segment: dx * sum_k r1^k r2^(n-k) / (n+1)
    s = sum(r1**k * r2 ** (n - k) for k in range(n + 1))
    return float(-ball_volume(n) * np.sum((x2 - x1) * s) / (n + 1))


def diameter(geometry: Geometry) -> float:
    pts = geometry.coords
    try:
        pts = pts[ConvexHull(pts).vertices]
    except QhullError:
        pass
    d = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((d**2).sum(-1)).max())


def spacing_ratio(geometry: Geometry) -> float:
    e = _edge_lengths(geometry.coords, geometry.closed)
    return float(e.max() / e.min())


def _spline(geometry: Geometry):
    """Cubic spline through the vertices parametrised by chord length.

    Returns ``(spline, u_start, u_end, u_knots)``.  Axis-to-axis profiles are
    extended by their mirror images across the axis so that the spline
    respects the reflection symmetry at the poles.
    """
    pts = geometry.coords
    axis = isinstance(geometry, AxisymProfile) and geometry.closure == AXIS_TO_AXIS
    if geometry.closed:
        ext = np.vstack([pts, pts[:1]])
        u = np.concatenate([[0.0], np.cumsum(_edge_lengths(pts, True))])
        return CubicSpline(u, ext, bc_type="periodic"), 0.0, u[-1], u[:-1]
    if axis:
        k = min(4, len(pts) - 1)
        head = pts[k:0:-1] * np.array([1.0, -1.0])
        tail = pts[-2 : -k - 2 : -1] * np.array([1.0, -1.0])
        ext = np.vstack([head, pts, tail])
        u = np.concatenate([[0.0], np.cumsum(_edge_lengths(ext, False))])
        return CubicSpline(u, ext), u[k], u[k + len(pts) - 1], u[k : k + len(pts)]
    u = np.concatenate([[0.0], np.cumsum(_edge_lengths(pts, False))])
    return CubicSpline(u, pts), 0.0, u[-1], u


def _graded_density(rho: np.ndarray, gaps: np.ndarray, closed: bool, grade: float) -> np.ndarray:
    """Limit the growth of the local spacing ``1/rho`` to ``grade`` per unit length.

    ``gaps[i]`` is the parameter distance between knots ``i`` and ``i + 1``.
    """
    rho = rho.copy()
    m = len(rho)
    links = m if closed else m - 1
    for _ in range(2 if closed else 1):
        for i in range(links):
            j = (i + 1) % m
            rho[j] = max(rho[j], 1.0 / (1.0 / rho[i] + grade * gaps[i]))
        for i in range(links - 1, -1, -1):
            j = (i + 1) % m
            rho[i] = max(rho[i], 1.0 / (1.0 / rho[j] + grade * gaps[i]))
    return rho


def resample(
    geometry: Geometry,
    target_spacing: float,
    resolution: float | None = None,
    grade: float = 0.25,
    check: bool = True,
) -> Geometry:
    """Redistribute vertices along the curve at near-uniform arclength spacing.

    Vertices are placed on the cubic spline through the current vertices,
    which moves them tangentially up to a normal error of order ``h^4``.
    Axis endpoints and open-curve endpoints are kept.

    Parameters
    ----------
    target_spacing : float
        Desired (maximal) vertex spacing, ``0 < target_spacing < diameter / 8``.
    resolution : float, optional
        When given, the local spacing is additionally capped at
        ``resolution / |A|`` so that high-curvature regions are refined.
    grade : float
        Maximal growth of the local spacing per unit arclength in adaptive mode.
    """
    if check and not 0.0 < target_spacing < diameter(geometry) / 8.0:
        raise ValueError("target_spacing must lie in (0, diameter/8)")
    spline, u0, u1, knots = _spline(geometry)
    length = u1 - u0
    if resolution is None:
        m = int(round(length / target_spacing))
        levels = u0 + length * np.arange(m + (0 if geometry.closed else 1)) / m
    else:
        amag = np.sqrt(quantities(geometry).A_norm_sq)
        rho = np.maximum(1.0 / target_spacing, amag / resolution)
        if geometry.closed:
            kc = np.append(knots, u1)
            rho = _graded_density(rho, np.diff(kc), True, grade)
            rho_c = np.append(rho, rho[0])
        else:
            kc = knots
            rho_c = rho = _graded_density(rho, np.diff(kc), False, grade)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (rho_c[1:] + rho_c[:-1]) * np.diff(kc))])
        m = int(math.ceil(cum[-1]))
        targets = cum[-1] * np.arange(m + (0 if geometry.closed else 1)) / m
        levels = np.interp(targets, cum, kc)
    if m < MIN_VERTICES:
        raise TooCoarse(f"resampling would leave {m} vertices")
    out = spline(levels)
    if not geometry.closed:
        out[0] = geometry.coords[0]
        out[-1] = geometry.coords[-1]
    if isinstance(geometry, AxisymProfile):
        if geometry.closure == AXIS_TO_AXIS:
            out[0, 1] = 0.0
            out[-1, 1] = 0.0
        return AxisymProfile(out, n=geometry.n, closure=geometry.closure)
    return PolyCurve(out, closed=geometry.closed)


def parabolic_rescale(geometry: Geometry, time: float, center: SpacetimePoint, lam: float):
    """Map ``x -> lam (x - x0)`` and ``t -> lam^2 (t - t0)``.

    Returns ``(geometry, time)``.  For axisymmetric geometry the spatial
    centre must lie on the axis.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    x0 = center.xy
    if isinstance(geometry, AxisymProfile) and x0[1] != 0.0:
        raise OffAxisCenter("rescaling centre of an axisymmetric profile must lie on the axis")
    pts = lam * (geometry.coords - x0)
    if isinstance(geometry, AxisymProfile):
        g = AxisymProfile._trusted(pts, geometry.n, geometry.closure)
    else:
        g = PolyCurve._trusted(pts, geometry.closed)
    return g, lam * lam * (time - center.t0)


def point_segment_distance(q: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from points ``q`` (M, 2) to segments ``a -> b`` (K, 2); shape (M, K)."""
    d = b - a
    dd = np.maximum((d * d).sum(-1), 1e-300)
    w = q[:, None, :] - a[None, :, :]
    s = np.clip((w * d[None]).sum(-1) / dd[None], 0.0, 1.0)
    diff = w - s[..., None] * d[None]
    return np.sqrt((diff * diff).sum(-1))


def segments(geometry: Geometry):
    pts = geometry.coords
    if geometry.closed:
        return pts, np.roll(pts, -1, axis=0)
    return pts[:-1], pts[1:]


def distance_to(points: np.ndarray, geometry: Geometry, chunk: int = 1024) -> np.ndarray:
    """Distance from each of ``points`` to the polyline of ``geometry``."""
    a, b = segments(geometry)
    out = np.empty(len(points))
    for i in range(0, len(points), chunk):
        out[i : i + chunk] = point_segment_distance(points[i : i + chunk], a, b).min(axis=1)
    return out


def hausdorff_distance(g1: Geometry, g2: Geometry) -> float:
    """Hausdorff distance between the two polylines (vertex-sampled both ways)."""
    return float(max(distance_to(g1.coords, g2).max(), distance_to(g2.coords, g1).max()))
