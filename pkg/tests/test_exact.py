import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcflab.errors import InvalidSpec, NonNegativeTime, PastExtinction, UnsupportedFactorization
from mcflab.exact import (
    CylinderSolution,
    DumbbellSpec,
    SphereSolution,
    cylinder_at,
    dumbbell,
    grim_reaper,
    grim_reaper_height,
    soliton_residual,
    sphere_at,
    triple_bulb,
)
from mcflab.geometry import AXIS_TO_AXIS, AxisymProfile, quantities


def test_sphere_radius_examples():
    sol = SphereSolution(1.0, 2)
    assert sol.radius(0.0) == 1.0
    assert sol.radius(0.24) == pytest.approx(0.2, abs=1e-12)
    with pytest.raises(PastExtinction):
        SphereSolution(1.0, 1).radius(0.5)


@pytest.mark.parametrize("R0, n", [(1.0, 1), (1.0, 2), (2.5, 3)])
def test_sphere_ode(R0, n):
    sol = SphereSolution(R0, n)
    assert sol.T == R0**2 / (2 * n)
    for t in np.linspace(0, 0.9 * sol.T, 5):
        r = sol.radius(t)
        # d/dt sqrt(R0^2 - 2nt) = -n / r, evaluated on the formula
        drdt = -n / math.sqrt(R0**2 - 2 * n * t)
        assert drdt == pytest.approx(-n / r, rel=1e-12)


def test_cylinder_examples():
    sol = CylinderSolution(1.0, 2)
    assert sol.radius(0.0) == 1.0
    assert sol.radius(0.375) == pytest.approx(0.5)
    assert sol.T == 0.5
    with pytest.raises(UnsupportedFactorization):
        cylinder_at(CylinderSolution(1.0, 3, 2), 0.0, 2.0, 32)
    assert CylinderSolution(1.0, 3, 2).T == 0.5


def test_grim_reaper_examples():
    assert grim_reaper_height(0.0, 0.0) == 0.0
    assert grim_reaper_height(1.0, 0.0) == 1.0
    assert grim_reaper_height(0.0, math.pi / 3) == pytest.approx(math.log(2))


def test_grim_reaper_translates_exactly():
    p = np.linspace(-1.2, 1.2, 101)
    g0, g1 = grim_reaper(0.0, p), grim_reaper(0.7, p)
    np.testing.assert_array_equal(g1.coords[:, 0], g0.coords[:, 0])
    np.testing.assert_allclose(g1.coords[:, 1] - g0.coords[:, 1], 0.7, rtol=0, atol=1e-15)


def test_sphere_at_shapes():
    c = sphere_at(SphereSolution(1.0, 1), 0.0, 64)
    s = sphere_at(SphereSolution(1.0, 2), 0.0, 64)
    assert c.kind == "curve" and s.closure == AXIS_TO_AXIS
    np.testing.assert_allclose(np.hypot(*s.coords.T), 1.0)


def test_dumbbell_waist_curvature():
    g = dumbbell(DumbbellSpec(), 600)
    q = quantities(g)
    waist = np.argmin(np.abs(g.coords[:, 0]))
    assert g.coords[waist, 1] == pytest.approx(0.2, abs=1e-6)
    assert q.H[waist] == pytest.approx(5.0, rel=1e-2)
    assert q.H.min() > 0


def test_dumbbell_invalid_specs():
    with pytest.raises(InvalidSpec):
        DumbbellSpec(neck_radius=0.0)
    with pytest.raises(InvalidSpec):
        DumbbellSpec(neck_radius=1.2)
    with pytest.raises(InvalidSpec):
        DumbbellSpec(smoothing=0.0)


@settings(max_examples=15, deadline=None)
@given(
    neck=st.floats(0.1, 0.8),
    half=st.floats(0.1, 2.0),
    smooth=st.floats(0.2, 0.8),
    right=st.floats(0.9, 1.5),
)
def test_dumbbell_profiles_are_valid(neck, half, smooth, right):
    g = dumbbell(DumbbellSpec(1.0, neck, half, smooth, right), 300)
    assert isinstance(g, AxisymProfile)
    assert g.coords[0, 1] == 0.0 and g.coords[-1, 1] == 0.0


def test_triple_bulb_has_two_waists():
    g = triple_bulb(N=900)
    r = g.coords[:, 1]
    x = g.coords[:, 0]
    thin = x[(r < 0.2 + 1e-6) & (r > 0.1)]
    assert thin.min() < 0 < thin.max()


def test_soliton_residual_examples():
    # the self-similar circle has radius sqrt(-2t); at t = -1/2 that is 1
    g = sphere_at(SphereSolution(1.0, 1), 0.0, 512)
    assert soliton_residual(g, -0.5).max() <= 1e-3
    wrong = sphere_at(SphereSolution(1.0, 2), 0.0, 512)
    assert soliton_residual(wrong, -1.0).min() >= 0.4
    p = np.linspace(-1.2, 1.2, 201)
    assert soliton_residual(grim_reaper(-1.0, p), -1.0).max() > 0.1
    with pytest.raises(NonNegativeTime):
        soliton_residual(wrong, 0.0)
