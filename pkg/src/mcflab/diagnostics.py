"""Monitored quantities: Gaussian densities, noncollapsing, convexity.

All routines are read-only functions of geometries and histories.  For
hypersurfaces of revolution, space-time centres are given in meridian
coordinates ``(x, rho)``; a centre with ``rho > 0`` is taken in the meridian
half-plane of angle zero and orbit integrals are done by quadrature in the
cosine of the orbit angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
import numpy as np
from scipy.special import betainc, ive, roots_jacobi

from .errors import NonBackwardTime, NonPositiveDensity, NotMeanConvex
from .geometry import (
    AxisymProfile,
    Geometry,
    PolyCurve,
    SpacetimePoint,
    ball_volume,
    quantities,
    segments,
    sphere_measure,
)
from .parallel import ordered_map

# --------------------------------------------------------------------------- kernels


def heat_kernel(x, t: float, center: SpacetimePoint, n: int):
    """Backwards heat kernel ``(4 pi (t0 - t))^(-n/2) exp(-|x - x0|^2 / (4 (t0 - t)))``.

    ``x`` may be a single point or an array of points (last axis = coordinates).
    """
    tau = center.t0 - t
    if not tau > 0:
        raise NonBackwardTime(f"need t < t0, got t={t}, t0={center.t0}")
    d2 = np.sum((np.asarray(x, dtype=float) - center.xy) ** 2, axis=-1)
    out = (4.0 * np.pi * tau) ** (-0.5 * n) * np.exp(-d2 / (4.0 * tau))
    return float(out) if np.ndim(out) == 0 else out


def cutoff(x, t: float, center: SpacetimePoint, rho: float, n: int = 1):
    """Localisation ``(1 - (|x - x0|^2 + 2n (t - t0)) / rho^2)_+^3``.

    Returned as defined, without renormalisation, so it exceeds 1 for
    ``t < t0`` near the centre.  ``rho = inf`` gives 1.
    """
    d2 = np.sum((np.asarray(x, dtype=float) - center.xy) ** 2, axis=-1)
    if math.isinf(rho):
        out = np.ones_like(d2, dtype=float)
    else:
        out = np.maximum(1.0 - (d2 + 2.0 * n * (t - center.t0)) / rho**2, 0.0) ** 3
    return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------- orbit integrals


@lru_cache(maxsize=None)
def _orbit_rule(n: int, m: int = 96):
    """Nodes and weights for integrating ``f(cos theta)`` over ``S^(n-1)``."""
    if n == 2:
        # S^1: integrate over theta in [0, 2 pi] with the trapezoid rule
        th = 2.0 * np.pi * (np.arange(2 * m) + 0.5) / (2 * m)
        return np.cos(th), np.full(2 * m, 2.0 * np.pi / (2 * m))
    a = 0.5 * (n - 3)
    c, w = roots_jacobi(m, a, a)
    return c, w * sphere_measure(n - 2)


def _slice_terms(g: Geometry, t: float, center: SpacetimePoint, rho: float, with_defect: bool):
    """Heat kernel times cutoff (and optionally the soliton defect) per vertex, orbit-integrated."""
    q = quantities(g)
    p = g.coords
    tau = center.t0 - t
    if not tau > 0:
        raise NonBackwardTime("slice is not before the centre")
    x0 = center.xy
    if isinstance(g, PolyCurve) or x0[1] == 0.0:
        n = 1 if isinstance(g, PolyCurve) else g.n
        rel = p - x0
        d2 = np.sum(rel * rel, axis=1)
        k = (4 * np.pi * tau) ** (-0.5 * n) * np.exp(-d2 / (4 * tau))
        phi = np.ones_like(d2) if math.isinf(rho) else np.maximum(1 - (d2 + 2 * n * (t - center.t0)) / rho**2, 0) ** 3
        dens = k * phi * q.weight
        if not with_defect:
            return dens, None
        xn = np.einsum("ij,ij->i", rel, q.normal)
        defect = (q.H + xn / (2.0 * (t - center.t0))) ** 2
        return dens, defect * dens
    # off-axis centre: integrate over the orbit of each profile point
    n = g.n
    c, w = _orbit_rule(n)
    x, r = p[:, 0:1], p[:, 1:2]
    rho0 = x0[1]
    d2 = (x - x0[0]) ** 2 + r * r + rho0 * rho0 - 2.0 * r * rho0 * c[None, :]
    k = (4 * np.pi * tau) ** (-0.5 * n) * np.exp(-d2 / (4 * tau))
    phi = np.ones_like(d2) if math.isinf(rho) else np.maximum(1 - (d2 + 2 * n * (t - center.t0)) / rho**2, 0) ** 3
    base = q.weight / sphere_measure(n - 1)
    dens = (k * phi) @ w * base
    if not with_defect:
        return dens, None
    xn = (x - x0[0]) * q.normal[:, 0:1] + (r - rho0 * c[None, :]) * q.normal[:, 1:2]
    defect = (q.H[:, None] + xn / (2.0 * (t - center.t0))) ** 2
    return dens, (defect * k * phi) @ w * base


def gaussian_integral(g: Geometry, t: float, center: SpacetimePoint, rho: float = math.inf) -> float:
    """``sum(heat_kernel * cutoff * weight)`` over one geometry at time ``t``."""
    return float(np.sum(_slice_terms(g, t, center, rho, False)[0]))


# --------------------------------------------------------------------------- probes


@dataclass(frozen=True)
class DensityProbe:
    """Space-time centre, localisation radius and the scales to sample.

    Parameters
    ----------
    center : SpacetimePoint
    cutoff_scale : float
        Localisation radius ``rho``; ``inf`` for the global kernel.
    r_grid : sequence of float
        Scales ``0 < r < rho``; scale ``r`` samples the slice at ``t0 - r^2``.
    """

    center: SpacetimePoint
    cutoff_scale: float = math.inf
    r_grid: tuple = (0.1, 0.2, 0.3, 0.4)

    def __post_init__(self):
        grid = tuple(float(r) for r in self.r_grid)
        object.__setattr__(self, "r_grid", grid)
        if not self.cutoff_scale > 0:
            raise ValueError("cutoff_scale must be positive")
        if any(not 0 < r < self.cutoff_scale for r in grid):
            raise ValueError("every scale must lie in (0, cutoff_scale)")

    def times(self) -> np.ndarray:
        return self.center.t0 - np.asarray(self.r_grid) ** 2


def _density_at(history, probe: DensityProbe, r: float, with_defect: bool):
    t_req = probe.center.t0 - r * r
    snap = history.slice_at(t_req)
    if snap.time >= probe.center.t0:
        raise NonBackwardTime("nearest snapshot is not before the probe centre")
    theta = 0.0
    defect = 0.0
    for g in snap.components:
        dens, dfc = _slice_terms(g, snap.time, probe.center, probe.cutoff_scale, with_defect)
        theta += float(np.sum(dens))
        if with_defect:
            defect += float(np.sum(dfc))
    return snap.time, theta, defect


def gaussian_density(history, probe: DensityProbe) -> np.ndarray:
    """Gaussian density ratios ``Theta(r)`` for every scale of the probe.

    Returns an array of shape (len(r_grid), 2) with rows ``(r, Theta)``.
    Each slice is the nearest recorded snapshot, which must lie within one
    step of ``t0 - r^2`` (:class:`~mcflab.errors.UncoveredTime` otherwise).
    """
    vals = ordered_map(lambda r: _density_at(history, probe, r, False)[1], probe.r_grid)
    return np.column_stack([np.asarray(probe.r_grid), np.asarray(vals)])


@dataclass(frozen=True)
class MonotonicityReport:
    """Densities ordered by backward time (largest scale first)."""

    r: np.ndarray
    time: np.ndarray
    theta: np.ndarray
    defect: np.ndarray
    violations: np.ndarray
    max_violation: float

    @property
    def series(self) -> np.ndarray:
        return np.column_stack([self.r, self.theta])

    @property
    def defect_series(self) -> np.ndarray:
        return self.defect


def monotonicity_report(history, probe: DensityProbe) -> MonotonicityReport:
    """Density as a function of time and its monotonicity defect.

    ``violations[k] = Theta(later) - Theta(earlier)`` for consecutive slices;
    monotonicity says these are ``<= 0``.  ``defect`` is the quadrature of
    ``|H_vec - (x - x0)_perp / (2 (t - t0))|^2`` against kernel and cutoff,
    which vanishes exactly on shrinkers centred at the probe.
    """
    if len(probe.r_grid) < 4:
        raise ValueError("a monotonicity report needs at least 4 scales")
    rs = np.sort(np.asarray(probe.r_grid))[::-1]
    rows = ordered_map(lambda r: _density_at(history, probe, r, True), rs)
    t = np.array([row[0] for row in rows])
    theta = np.array([row[1] for row in rows])
    defect = np.array([row[2] for row in rows])
    viol = theta[1:] - theta[:-1]
    return MonotonicityReport(rs, t, theta, defect, viol, float(viol.max()))


# --------------------------------------------------------------------------- Andrews quantities


@dataclass(frozen=True, eq=False)
class AndrewsReport:
    """Pointwise chord quantities and the resulting noncollapsing constant."""

    Z_star: np.ndarray
    Z_lower: np.ndarray
    H: np.ndarray
    alpha_interior: float
    alpha_exterior: float

    @property
    def alpha(self) -> float:
        return min(self.alpha_interior, self.alpha_exterior)

    @property
    def ratio(self) -> np.ndarray:
        """``H / Z*`` per vertex (``inf`` where ``Z* <= 0``)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.Z_star > 0, self.H / self.Z_star, np.inf)


def _chord_bounds(p: np.ndarray, nu_in: np.ndarray, axisym: bool, closed_rows=None, chunk: int = 256):
    """Sup and inf over other points of ``2<y - x, nu>/|y - x|^2``.

    For profiles the other points range over whole orbits.  In the cosine
    ``c`` of the orbit angle the quantity is a ratio of affine functions,
    hence monotone, so the extremes over an orbit are attained at
    ``c = +1`` and ``c = -1``.  The orbit of ``x`` itself contributes the
    constant ``nu_r / r`` (the rotational curvature).
    """
    N = len(p)
    zmax = np.empty(N)
    zmin = np.empty(N)
    for a in range(0, N, chunk):
        b = min(N, a + chunk)
        xi = p[a:b, None, :]
        nv = nu_in[a:b, None, :]
        dx = p[None, :, 0] - xi[..., 0]
        if not axisym:
            dy = p[None, :, 1] - xi[..., 1]
            num = 2.0 * (dx * nv[..., 0] + dy * nv[..., 1])
            den = dx * dx + dy * dy
            idx = np.arange(a, b)
            den[idx - a, idx] = 1.0
            q = num / den
            q[idx - a, idx] = np.nan
            zmax[a:b] = np.nanmax(q, axis=1)
            zmin[a:b] = np.nanmin(q, axis=1)
            continue
        ri = xi[..., 1]
        rj = p[None, :, 1]
        vals = []
        for c in (1.0, -1.0):
            dr = c * rj - ri
            num = 2.0 * (dx * nv[..., 0] + dr * nv[..., 1])
            den = dx * dx + rj * rj + ri * ri - 2.0 * c * ri * rj
            with np.errstate(divide="ignore", invalid="ignore"):
                vals.append(num / den)
        q = np.stack(vals)
        idx = np.arange(a, b)
        r_self = p[a:b, 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            self_val = np.where(r_self > 0, -nu_in[a:b, 1] / r_self, np.nan)
        q[:, idx - a, idx] = self_val[None, :]
        # axis points have a one-point orbit: only their c=+1 copy is real
        on_axis = rj[0] == 0
        q[1][:, on_axis] = np.nan
        zmax[a:b] = np.nanmax(q, axis=(0, 2))
        zmin[a:b] = np.nanmin(q, axis=(0, 2))
    return zmax, zmin


def andrews_quantities(geometry: Geometry) -> AndrewsReport:
    """Interior and exterior noncollapsing of a mean convex geometry.

    ``Z*`` and ``Z_*`` are the sup and inf over ``y != x`` of
    ``2 <y - x, nu_in(x)> / |y - x|^2`` with the inward normal; the Andrews
    constant is ``min H/Z*`` (over ``Z* > 0``) and ``min H/(-Z_*)`` (over
    ``Z_* < 0``).
    """
    if isinstance(geometry, PolyCurve) and not geometry.closed:
        raise ValueError("noncollapsing needs a closed hypersurface")
    q = quantities(geometry)
    if q.H.min() <= 0:
        raise NotMeanConvex(f"min H = {q.H.min():.3g} <= 0")
    axisym = isinstance(geometry, AxisymProfile)
    zmax, zmin = _chord_bounds(np.asarray(geometry.coords), -q.normal, axisym)
    with np.errstate(divide="ignore", invalid="ignore"):
        ai = np.where(zmax > 0, q.H / zmax, np.inf).min()
        ae = np.where(zmin < 0, q.H / (-zmin), np.inf).min()
    return AndrewsReport(zmax, zmin, q.H, float(ai), float(ae))


def andrews_bruteforce(geometry: Geometry, n_angles: int = 64) -> tuple:
    """All-pairs evaluation of ``(Z*, Z_*)`` by explicit loops.

    Orbits are sampled at ``n_angles`` equally spaced angles (including 0
    and pi).  Independent of the vectorised path; meant for small ``N``.
    """
    q = quantities(geometry)
    p = np.asarray(geometry.coords)
    nu = -q.normal
    N = len(p)
    zs = np.full(N, -np.inf)
    zl = np.full(N, np.inf)
    axisym = isinstance(geometry, AxisymProfile)
    angles = 2.0 * np.pi * np.arange(n_angles) / n_angles
    for i in range(N):
        if axisym:
            xi = np.array([p[i, 0], p[i, 1], 0.0])
            ni = np.array([nu[i, 0], nu[i, 1], 0.0])
        for j in range(N):
            if axisym:
                ys = [np.array([p[j, 0], p[j, 1] * math.cos(a), p[j, 1] * math.sin(a)]) for a in angles]
                if p[j, 1] == 0:
                    ys = ys[:1]
                cand = []
                for y in ys:
                    d = y - xi
                    dd = float(d @ d)
                    if dd == 0.0:
                        continue
                    cand.append(2.0 * float(d @ ni) / dd)
            else:
                if i == j:
                    continue
                d = p[j] - p[i]
                cand = [2.0 * float(d @ nu[i]) / float(d @ d)]
            for v in cand:
                zs[i] = max(zs[i], v)
                zl[i] = min(zl[i], v)
    return zs, zl


# --------------------------------------------------------------------------- convexity, area ratios


@dataclass(frozen=True)
class ConvexityReport:
    value: float
    index: int
    location: tuple


def convexity_ratio(geometry: Geometry) -> ConvexityReport:
    """Minimum of ``lambda_1 / H`` over the vertices and where it occurs."""
    q = quantities(geometry)
    if q.H.min() <= 0:
        raise NotMeanConvex(f"min H = {q.H.min():.3g} <= 0")
    ratio = q.lambda1 / q.H
    i = int(np.argmin(ratio))
    return ConvexityReport(float(ratio[i]), i, tuple(float(v) for v in geometry.coords[i]))


def _clip_segments(a: np.ndarray, b: np.ndarray, x: np.ndarray, r: float):
    """Parameter interval ``[s0, s1]`` of each segment inside the disc."""
    d = b - a
    f = a - x
    A = np.sum(d * d, axis=1)
    B = 2.0 * np.sum(f * d, axis=1)
    C = np.sum(f * f, axis=1) - r * r
    disc = B * B - 4 * A * C
    ok = disc > 0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    s0 = np.clip((-B - sq) / (2 * A), 0.0, 1.0)
    s1 = np.clip((-B + sq) / (2 * A), 0.0, 1.0)
    s1 = np.where(ok, np.maximum(s1, s0), s0)
    return s0, s1, np.sqrt(A)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def area_ratio(geometry: Geometry, x, r: float) -> float:
    """Measure of the hypersurface inside ``B(x, r)`` over ``omega_n r^n``.

    Exact for polygons.  For profiles the orbit measure inside the ball is
    integrated along the clipped profile with Gauss-Legendre quadrature (on
    an axis centre this is exact for the polygonal surface of revolution).
    """
    if not r > 0:
        raise ValueError("radius must be positive")
    x = np.asarray(x, dtype=float)
    a, b = segments(geometry)
    if isinstance(geometry, PolyCurve):
        s0, s1, L = _clip_segments(a, b, x, r)
        return float(np.sum((s1 - s0) * L) / (ball_volume(1) * r))
    n = geometry.n
    if x[1] == 0.0:
        s0, s1, L = _clip_segments(a, b, x, r)
        u = 0.5 * (s1 - s0)[:, None] * (_GL_X[None, :] + 1.0) + s0[:, None]
        rr = a[:, 1:2] + u * (b[:, 1:2] - a[:, 1:2])
        meas = np.sum(rr ** (n - 1) * _GL_W[None, :], axis=1) * 0.5 * (s1 - s0) * L
        return float(sphere_measure(n - 1) * np.sum(meas) / (ball_volume(n) * r**n))
    # off-axis centre: fraction of each orbit inside the ball
    m = 64
    u = (np.arange(m) + 0.5) / m
    L = np.hypot(*(b - a).T)
    px = a[:, 0:1] + u * (b[:, 0:1] - a[:, 0:1])
    pr = a[:, 1:2] + u * (b[:, 1:2] - a[:, 1:2])
    rho0 = x[1]
    with np.errstate(divide="ignore", invalid="ignore"):
        cstar = ((px - x[0]) ** 2 + pr**2 + rho0**2 - r * r) / (2.0 * pr * rho0)
    cstar = np.clip(np.nan_to_num(cstar, nan=2.0), -1.0, 1.0)
    # share of S^(n-1) with cos(angle) >= c*: regularised incomplete beta
    frac = betainc(0.5 * (n - 1), 0.5 * (n - 1), 0.5 * (1.0 - cstar))
    meas = np.sum(frac * pr ** (n - 1), axis=1) * L / m
    return float(sphere_measure(n - 1) * np.sum(meas) / (ball_volume(n) * r**n))


# --------------------------------------------------------------------------- tangent flows


def sphere_density_closed_form(n: int) -> float:
    """Density of the shrinking ``S^n``: ``|S^n| (n / (2 pi e))^(n/2)``."""
    return sphere_measure(n) * (n / (2.0 * math.pi * math.e)) ** (0.5 * n)


def sphere_density_quadrature(n: int, N: int = 4096) -> float:
    """Density of the shrinking sphere by quadrature over its discretised slice at ``t = -1``."""
    from .exact import SphereSolution, sphere_at

    R = math.sqrt(2.0 * n)
    g = sphere_at(SphereSolution(R, n), 0.0, N)
    return gaussian_integral(g, -1.0, SpacetimePoint((0.0, 0.0), 0.0))


def cylinder_density_quadrature(n: int, N: int = 4096, half_length: float = 40.0) -> float:
    """Density of the shrinking ``R x S^(n-1)`` cylinder by quadrature at ``t = -1``.

    The truncated cylinder segment of radius ``sqrt(2(n-1))`` is integrated;
    the Gaussian tail beyond ``half_length`` is below ``1e-100``.
    """
    from .exact import CylinderSolution, cylinder_at

    R = math.sqrt(2.0 * (n - 1))
    g = cylinder_at(CylinderSolution(R, n, 1), 0.0, 2 * half_length, N)
    return gaussian_integral(g, -1.0, SpacetimePoint((0.0, 0.0), 0.0))


@lru_cache(maxsize=None)
def reference_densities(n: int) -> dict:
    """Tangent-flow densities for dimension ``n``, derived by quadrature.

    Keys ``plane``, ``sphere`` and (``n >= 2``) ``cylinder_1``.  Each entry
    carries the quadrature value and the closed-form cross-check.
    """
    table = {"plane": {"value": 1.0, "closed_form": 1.0, "method": "exact"}}
    table["sphere"] = {
        "value": sphere_density_quadrature(n),
        "closed_form": sphere_density_closed_form(n),
        "method": "quadrature over sphere slice, N=4096",
    }
    if n >= 2:
        table["cylinder_1"] = {
            "value": cylinder_density_quadrature(n),
            "closed_form": sphere_density_closed_form(n - 1),
            "method": "quadrature over cylinder segment, N=4096, |x|<=40",
        }
    return table


@dataclass(frozen=True)
class TangentClass:
    label: str
    density_value: float
    confidence: float
    reference: float = float("nan")

    def record(self) -> str:
        return (
            f"label={self.label} theta={self.density_value!r} "
            f"reference={self.reference!r} confidence={self.confidence:.6f}"
        )


def classify_tangent_flow(theta: float, n: int = 1, tol: float = 0.05) -> TangentClass:
    """Nearest model density (plane, sphere, cylinder) within relative ``tol``."""
    if not theta > 0:
        raise NonPositiveDensity(f"density must be positive, got {theta}")
    refs = reference_densities(n)
    best = None
    for label, entry in refs.items():
        rel = abs(theta - entry["value"]) / entry["value"]
        if best is None or rel < best[1]:
            best = (label, rel, entry["value"])
    label, rel, ref = best
    if rel > tol:
        return TangentClass("unclassified", float(theta), 0.0, float(ref))
    return TangentClass(label, float(theta), float(1.0 - rel / tol), float(ref))


def soliton_defect(geometry: Geometry, t: float, center: SpacetimePoint) -> np.ndarray:
    """Per-vertex ``|H + <x - x0, nu> / (2 (t - t0))|`` about an arbitrary centre."""
    q = quantities(geometry)
    rel = geometry.coords - center.xy
    xn = np.einsum("ij,ij->i", rel, q.normal)
    return np.abs(q.H + xn / (2.0 * (t - center.t0)))


def orbit_gaussian_closed_form(kappa: float, n: int) -> float:
    """``int_{S^(n-1)} exp(kappa cos) `` scaled by ``exp(-kappa)``; used in tests."""
    if kappa == 0:
        return sphere_measure(n - 1)
    return (2 * math.pi) ** (0.5 * n) * kappa ** (1 - 0.5 * n) * float(ive(0.5 * n - 1, kappa))


__all__ = [
    "heat_kernel",
    "cutoff",
    "DensityProbe",
    "gaussian_density",
    "gaussian_integral",
    "monotonicity_report",
    "MonotonicityReport",
    "AndrewsReport",
    "andrews_quantities",
    "andrews_bruteforce",
    "convexity_ratio",
    "area_ratio",
    "TangentClass",
    "classify_tangent_flow",
    "reference_densities",
    "sphere_density_closed_form",
    "soliton_defect",
]
