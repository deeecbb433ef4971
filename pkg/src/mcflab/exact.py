"""Closed-form flows and parameterised initial data used as oracles.

The shrinking sphere and the shrinking ``R x S^(n-1)`` cylinder solve the
flow by an ODE for the radius; the grim reaper is the translating graph
``u = t - log cos p``.  Dumbbells, ellipses and bulb chains are initial data
without closed-form evolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import (
    DomainViolation,
    InvalidSpec,
    NonNegativeTime,
    PastExtinction,
    UnsupportedFactorization,
)
from .geometry import (
    AXIS_TO_AXIS,
    OPEN_SEGMENT,
    AxisymProfile,
    Geometry,
    PolyCurve,
    _edge_lengths,
    quantities,
)

_DENSE = 40001
FLARE = 0.5


@dataclass(frozen=True)
class SphereSolution:
    """Round sphere ``S^n`` of initial radius ``R0`` shrinking under the flow."""

    R0: float = 1.0
    n: int = 2

    def __post_init__(self):
        if not self.R0 > 0:
            raise InvalidSpec("R0 must be positive")
        if int(self.n) != self.n or self.n < 1:
            raise InvalidSpec("n must be a positive integer")

    @property
    def T(self) -> float:
        return self.R0**2 / (2.0 * self.n)

    def radius(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t >= self.T):
            raise PastExtinction(f"t >= extinction time {self.T}")
        r = np.sqrt(self.R0**2 - 2.0 * self.n * t)
        return float(r) if r.ndim == 0 else r


@dataclass(frozen=True)
class CylinderSolution:
    """Round cylinder ``R^j x S^(n-j)`` of initial radius ``R0``."""

    R0: float = 1.0
    n: int = 2
    j: int = 1

    def __post_init__(self):
        if not self.R0 > 0:
            raise InvalidSpec("R0 must be positive")
        if not 0 <= self.j < self.n:
            raise InvalidSpec("need 0 <= j < n")

    @property
    def T(self) -> float:
        return self.R0**2 / (2.0 * (self.n - self.j))

    def radius(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t >= self.T):
            raise PastExtinction(f"t >= extinction time {self.T}")
        r = np.sqrt(self.R0**2 - 2.0 * (self.n - self.j) * t)
        return float(r) if r.ndim == 0 else r


@dataclass(frozen=True)
class DumbbellSpec:
    """Two round bulbs joined by a cylindrical neck.

    Parameters
    ----------
    bulb_radius : float
        Radius of the (left) bulb.
    neck_radius : float
        Radius of the neck, ``0 < neck_radius < bulb_radius``.
    neck_halflength : float
        Half the length of the exactly cylindrical part of the neck.
    smoothing : float
        Length of the blend between neck and bulb on each side.
    right_bulb_radius : float, optional
        Radius of the right bulb; defaults to ``bulb_radius``.
    dent_depth, dent_width : float
        Optional relative indentation ``1 - dent_depth * (1 - u^2)^3``,
        ``u = x / dent_width``, of the neck about its midpoint.  A dent fixes
        where the neck pinches first.
    """

    bulb_radius: float = 1.0
    neck_radius: float = 0.2
    neck_halflength: float = 1.5
    smoothing: float = 0.5
    right_bulb_radius: float | None = None
    dent_depth: float = 0.0
    dent_width: float = 0.5

    def __post_init__(self):
        radii = [self.bulb_radius, self.right_radius]
        if not self.neck_radius > 0:
            raise InvalidSpec("neck_radius must be positive")
        if self.neck_radius >= min(radii):
            raise InvalidSpec("neck_radius must be smaller than the bulb radius")
        if self.neck_halflength < 0 or not self.smoothing > 0:
            raise InvalidSpec("need neck_halflength >= 0 and smoothing > 0")
        _check_dent(self.dent_depth, self.dent_width, self.neck_halflength)

    @property
    def right_radius(self) -> float:
        return self.bulb_radius if self.right_bulb_radius is None else self.right_bulb_radius


def _check_dent(depth, width, halflength):
    if not 0 <= depth < 1:
        raise InvalidSpec("dent_depth must lie in [0, 1)")
    if depth > 0 and not 0 < width <= halflength:
        raise InvalidSpec("the dent must fit inside the cylindrical neck")


def sphere_at(sol: SphereSolution, t: float, N: int) -> Geometry:
    """Round sphere of the solution at time ``t`` with ``N`` vertices.

    A circle (``PolyCurve``) for ``n = 1``, otherwise a semicircular
    ``axis_to_axis`` profile centred at the origin.
    """
    R = sol.radius(t)
    if sol.n == 1:
        th = 2.0 * np.pi * np.arange(N) / N
        return PolyCurve(np.column_stack([R * np.cos(th), R * np.sin(th)]))
    th = np.pi * np.arange(N) / (N - 1)
    pts = np.column_stack([R * np.cos(th), R * np.sin(th)])
    pts[-1, 1] = 0.0
    return AxisymProfile(pts, n=sol.n, closure=AXIS_TO_AXIS)


def cylinder_at(sol: CylinderSolution, t: float, length: float, N: int) -> AxisymProfile:
    """Segment of the shrinking cylinder of axial extent ``length``.

    The result is an ``open_segment`` profile centred at ``x = 0``, meant for
    pointwise quantities; it cannot be flowed.
    """
    if sol.j != 1:
        raise UnsupportedFactorization("only R x S^(n-1) cylinders are axisymmetric")
    r = sol.radius(t)
    x = np.linspace(0.5 * length, -0.5 * length, N)
    return AxisymProfile(np.column_stack([x, np.full(N, r)]), n=sol.n, closure=OPEN_SEGMENT)


def grim_reaper(t: float, p_grid: Sequence[float]) -> PolyCurve:
    """The translating graph ``u(p) = t - log cos p`` sampled at ``p_grid``."""
    p = np.asarray(p_grid, dtype=float)
    if np.any(np.abs(p) >= 0.5 * np.pi):
        raise DomainViolation("grim reaper is defined for |p| < pi/2")
    return PolyCurve(np.column_stack([p, t - np.log(np.cos(p))]), closed=False)


def grim_reaper_height(t: float, p) -> np.ndarray:
    return t - np.log(np.cos(np.asarray(p, dtype=float)))


def _smoothstep(u):
    """Quintic ramp from 0 to 1 with vanishing first and second derivatives."""
    u = np.clip(u, 0.0, 1.0)
    return u**3 * (10.0 - 15.0 * u + 6.0 * u * u)


def _arclength_uniform(dense: np.ndarray, N: int) -> np.ndarray:
    s = np.concatenate([[0.0], np.cumsum(_edge_lengths(dense, False))])
    target = np.linspace(0.0, s[-1], N)
    return np.column_stack([np.interp(target, s, dense[:, 0]), np.interp(target, s, dense[:, 1])])


def profile_from_r2(r2, x_min: float, x_max: float, N: int, n: int = 2) -> AxisymProfile:
    """Axis-to-axis profile of the graph ``r = sqrt(r2(x))`` over ``[x_min, x_max]``.

    ``r2`` must vanish at both ends like ``|x - x_end|`` so the profile meets
    the axis orthogonally.  Vertices are spaced uniformly in arclength.
    """
    th = np.linspace(0.0, np.pi, _DENSE)
    x = 0.5 * (x_min + x_max) + 0.5 * (x_max - x_min) * np.cos(th)
    r = np.sqrt(np.maximum(r2(x), 0.0))
    r[0] = r[-1] = 0.0
    pts = _arclength_uniform(np.column_stack([x, r]), N)
    pts[0] = [x_max, 0.0]
    pts[-1] = [x_min, 0.0]
    return AxisymProfile(pts, n=n, closure=AXIS_TO_AXIS)


def _flare(a: float, R: float, sigma: float, c: float = FLARE):
    """Meridian leaving a cylinder of radius ``a`` and closing up into a sphere.

    The tangent angle ``psi`` obeys ``psi' = (cos psi / r) [c A (1 - B) - B]``
    in arclength, where ``A`` ramps in the flare and ``B`` the round end,
    both with the quintic ramp over ``sigma``.  Once ``B = 1`` the meridian
    is umbilic, i.e. a sphere centred on the axis, and the flare length is
    shot so that this sphere has radius ``R``.  With ``c < 1`` the mean
    curvature stays positive for every ``n >= 2``.

    Returns the dense flare ``(dx, r)`` starting at ``(0, a)`` and the
    offset of the sphere centre from the start.
    """

    def run(ell):
        def rhs(s, y):
            A = _smoothstep(s / sigma)
            B = _smoothstep((s - ell) / sigma)
            return [math.cos(y[2]), math.sin(y[2]), math.cos(y[2]) / y[1] * (c * A * (1 - B) - B)]

        end = max(ell + sigma, 1e-12)
        sol = solve_ivp(rhs, (0.0, end), [0.0, a, 0.0], method="DOP853", rtol=1e-11, atol=1e-13, dense_output=True)
        x, r, psi = sol.y[:, -1]
        return sol, x, r, psi

    def miss(ell):
        _, _, r, psi = run(ell)
        return r / math.cos(psi) - R

    lo, hi = -sigma, sigma
    while miss(hi) < 0:
        lo, hi = hi, 2 * hi
    ell = brentq(miss, lo, hi, xtol=1e-13)
    sol, x, r, psi = run(ell)
    s = np.linspace(0.0, sol.t[-1], max(64, int(sol.t[-1] / 1e-4)))
    dense = sol.sol(s)[:2].T
    rho = r / math.cos(psi)
    return dense, x + rho * math.sin(psi)


@dataclass(frozen=True)
class BulbChain:
    """Round bulbs in a row along the axis, joined by equal cylindrical necks.

    Each neck is an exact cylinder of radius ``neck_radius`` over an axial
    length ``2 * neck_halflength``; it opens into the neighbouring bulbs
    through a smooth mean-convex flare of blend length ``smoothing``.
    """

    radii: tuple = (1.0, 1.0)
    neck_radius: float = 0.2
    neck_halflength: float = 1.5
    smoothing: float = 0.5
    dent_depth: float = 0.0
    dent_width: float = 0.5

    def __post_init__(self):
        radii = tuple(float(r) for r in self.radii)
        object.__setattr__(self, "radii", radii)
        if len(radii) < 1 or self.neck_radius <= 0 or (len(radii) > 1 and min(radii) <= self.neck_radius):
            raise InvalidSpec("need 0 < neck_radius < every bulb radius")
        if not self.smoothing > 0 or self.neck_halflength < 0:
            raise InvalidSpec("need smoothing > 0 and neck_halflength >= 0")
        _check_dent(self.dent_depth, self.dent_width, self.neck_halflength)

    def _pieces(self):
        R, a, L = self.radii, self.neck_radius, self.neck_halflength
        flares = {r: _flare(a, r, self.smoothing) for r in set(R)} if len(R) > 1 else {}
        centers = [0.0]
        necks = []
        for k in range(1, len(R)):
            m = centers[-1] + flares[R[k - 1]][1] + L
            necks.append(m)
            centers.append(m + L + flares[R[k]][1])
        shift = 0.5 * ((centers[0] - R[0]) + (centers[-1] + R[-1]))
        return [c - shift for c in centers], [m - shift for m in necks], flares

    @property
    def neck_centers(self) -> list:
        return self._pieces()[1]

    @property
    def bulb_centers(self) -> list:
        return self._pieces()[0]

    def dense(self) -> np.ndarray:
        """Finely sampled meridian from the right pole to the left pole."""
        centers, necks, flares = self._pieces()
        R, L = self.radii, self.neck_halflength
        parts = []
        for i in range(len(R) - 1, -1, -1):
            c, r = centers[i], R[i]
            start, stop = 0.0, np.pi
            if i < len(R) - 1:
                f, _ = flares[r]
                start = math.atan2(f[-1, 1], (necks[i] - L - f[-1, 0]) - c)
            if i > 0:
                f, _ = flares[r]
                stop = math.atan2(f[-1, 1], (necks[i - 1] + L + f[-1, 0]) - c)
            phi = np.linspace(start, stop, max(16, int((stop - start) * r / 1e-4)))
            parts.append(np.column_stack([c + r * np.cos(phi), r * np.sin(phi)]))
            if i > 0:
                m = necks[i - 1]
                f, _ = flares[r]
                parts.append(np.column_stack([m + L + f[::-1, 0], f[::-1, 1]]))
                xs = np.linspace(m + L, m - L, max(3, int(2 * L / 1e-4)))[1:-1]
                parts.append(np.column_stack([xs, np.full_like(xs, self.neck_radius)]))
                g, _ = flares[R[i - 1]]
                parts.append(np.column_stack([m - L - g[:, 0], g[:, 1]]))
        pts = np.vstack(parts)
        keep = np.concatenate([[True], _edge_lengths(pts, False) > 1e-9])
        pts = pts[keep]
        if self.dent_depth > 0:
            for m in necks:
                u = np.clip((pts[:, 0] - m) / self.dent_width, -1.0, 1.0)
                inside = np.abs(pts[:, 0] - m) < L
                pts[inside, 1] *= 1.0 - self.dent_depth * (1.0 - u[inside] ** 2) ** 3
        pts[0, 1] = pts[-1, 1] = 0.0
        return pts


def bulb_chain(chain: BulbChain, N: int, n: int = 2) -> AxisymProfile:
    """Axis-to-axis profile of a bulb chain with ``N`` arclength-uniform vertices."""
    pts = _arclength_uniform(chain.dense(), N)
    pts[0, 1] = pts[-1, 1] = 0.0
    return AxisymProfile(pts, n=n, closure=AXIS_TO_AXIS)


def dumbbell(spec: DumbbellSpec, N: int, n: int = 2) -> AxisymProfile:
    """Smooth dumbbell profile: two round bulbs joined by a cylindrical neck.

    The neck opens into each bulb through a C^2 flare whose profile
    curvature is ramped with ``10u^3 - 15u^4 + 6u^5`` over the smoothing
    length; the result is mean convex.
    """
    chain = BulbChain(
        radii=(spec.bulb_radius, spec.right_radius),
        neck_radius=spec.neck_radius,
        neck_halflength=spec.neck_halflength,
        smoothing=spec.smoothing,
        dent_depth=spec.dent_depth,
        dent_width=spec.dent_width,
    )
    return bulb_chain(chain, N, n)


def triple_bulb(
    radii=(1.0, 1.0, 1.0), neck_radius=0.2, neck_halflength=1.5, smoothing=0.5, N=768, n=2
) -> AxisymProfile:
    """Three bulbs joined by two equal necks."""
    return bulb_chain(BulbChain(tuple(radii), neck_radius, neck_halflength, smoothing), N, n)


def ellipse_curve(a: float, b: float, N: int) -> PolyCurve:
    """Ellipse with semi-axes ``a`` (along x) and ``b``, uniform in arclength."""
    th = np.linspace(0.0, 2 * np.pi, _DENSE)
    dense = np.column_stack([a * np.cos(th), b * np.sin(th)])
    pts = _arclength_uniform(dense, N + 1)[:-1]
    return PolyCurve(pts)


def ellipsoid_profile(a: float, b: float, N: int, n: int = 2) -> AxisymProfile:
    """Spheroid with semi-axis ``a`` along the axis and ``b`` transverse."""
    return profile_from_r2(lambda x: b * b * (1.0 - (x / a) ** 2), -a, a, N, n)


def soliton_residual(geometry: Geometry, t: float) -> np.ndarray:
    """Per-vertex ``|H_vec - x_perp / (2t)|`` for a shrinker centred at the origin.

    With ``H_vec = -H nu`` and ``x_perp = <x, nu> nu`` this is
    ``|H + <x, nu> / (2t)|``.
    """
    if t >= 0:
        raise NonNegativeTime("self-similar residual needs t < 0")
    q = quantities(geometry)
    xn = np.einsum("ij,ij->i", geometry.coords, q.normal)
    return np.abs(q.H + xn / (2.0 * t))


__all__ = [
    "SphereSolution",
    "CylinderSolution",
    "DumbbellSpec",
    "BulbChain",
    "sphere_at",
    "cylinder_at",
    "grim_reaper",
    "grim_reaper_height",
    "dumbbell",
    "triple_bulb",
    "bulb_chain",
    "ellipse_curve",
    "ellipsoid_profile",
    "profile_from_r2",
    "soliton_residual",
]
