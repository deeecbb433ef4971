import math

import numpy as np
import pytest

from conftest import frozen
from mcflab.diagnostics import (
    DensityProbe,
    andrews_bruteforce,
    andrews_quantities,
    area_ratio,
    classify_tangent_flow,
    convexity_ratio,
    cutoff,
    gaussian_density,
    heat_kernel,
    monotonicity_report,
    reference_densities,
    sphere_density_closed_form,
)
from mcflab.errors import NonBackwardTime, NonPositiveDensity, NotMeanConvex
from mcflab.exact import (
    CylinderSolution,
    DumbbellSpec,
    SphereSolution,
    cylinder_at,
    dumbbell,
    ellipse_curve,
    ellipsoid_profile,
    grim_reaper,
    sphere_at,
)
from mcflab.flow import EngineParams, FlowHistory, FlowState, StopCriterion, evolve
from mcflab.geometry import PolyCurve, SpacetimePoint, quantities

ORIGIN = SpacetimePoint((0.0, 0.0), 0.0)
CIRCLE_R = (0.6, 0.45, 0.3, 0.2, 0.1, 0.05)


def shrinking_circle_history(r_grid=CIRCLE_R, N=512):
    sol = SphereSolution(1.0, 1)
    times = sorted(sol.T - r * r for r in r_grid)
    return FlowHistory.from_states([FlowState(sphere_at(sol, t, N), t) for t in times])


def straight_line(half=20.0, N=4001):
    x = np.linspace(-half, half, N)
    return PolyCurve(np.column_stack([x, np.zeros_like(x)]), closed=False)


# --------------------------------------------------------------------------- kernels


def test_heat_kernel_examples():
    c = SpacetimePoint((0.3, -0.2), 1.0)
    assert heat_kernel((0.3, -0.2), 1.0 - 1 / (4 * math.pi), c, 1) == pytest.approx(1.0, rel=1e-14)
    assert heat_kernel((1e3, 0.0), 0.5, c, 2) == 0.0
    with pytest.raises(NonBackwardTime):
        heat_kernel((0.0, 0.0), 1.0, c, 1)
    pts = np.array([[0.3, -0.2], [1.3, -0.2]])
    k = heat_kernel(pts, 0.0, c, 1)
    assert k.shape == (2,) and k[0] > k[1]


def test_cutoff_examples():
    c = SpacetimePoint((0.0, 0.0), 1.0)
    assert cutoff((0.0, 0.0), 1.0, c, 2.0) == 1.0
    assert cutoff((3.0, 0.0), 1.0, c, 2.0) == 0.0
    assert cutoff((2.0, 0.0), 1.5, c, 2.0, n=2) == 0.0
    assert cutoff((1.0, 0.0), 1.5, c, 2.0, n=2) == pytest.approx(0.25**3)
    rho, n = 2.0, 1
    assert cutoff((0.0, 0.0), 1.0 - rho**2 / (4 * n), c, rho, n) == pytest.approx(frozen()["cutoff_center_tau"])
    assert cutoff((5.0, 5.0), 0.0, c, math.inf) == 1.0


# --------------------------------------------------------------------------- densities


def plane_history(r_grid):
    line = straight_line()
    return FlowHistory.from_states([FlowState(line, 1.0 - r * r) for r in r_grid])


def test_plane_density():
    r_grid = (2.0, 1.0, 0.5, 0.2)
    probe = DensityProbe(SpacetimePoint((0.0, 0.0), 1.0), math.inf, r_grid)
    np.testing.assert_allclose(gaussian_density(plane_history(r_grid), probe)[:, 1], 1.0, atol=1e-3)
    r_grid = (1.0, 0.5, 0.2)
    probe = DensityProbe(SpacetimePoint((0.0, 0.0), 1.0), 20.0, r_grid)
    np.testing.assert_allclose(gaussian_density(plane_history(r_grid), probe)[:, 1], 1.0, atol=1e-3)


def test_plane_density_cutoff_excess():
    # the unnormalised cutoff adds 24 (r/rho)^4 to the plane density at leading order
    probe = DensityProbe(SpacetimePoint((0.0, 0.0), 1.0), 20.0, (2.0,))
    theta = gaussian_density(plane_history((2.0,)), probe)[0, 1]
    assert theta - 1.0 == pytest.approx(24 * (2.0 / 20.0) ** 4, rel=0.1)


def test_shrinking_circle_density():
    hist = shrinking_circle_history()
    probe = DensityProbe(SpacetimePoint((0.0, 0.0), 0.5), math.inf, CIRCLE_R)
    theta = gaussian_density(hist, probe)[:, 1]
    target = math.sqrt(2 * math.pi / math.e)
    assert np.abs(theta - target).max() <= 1e-2
    assert frozen()["circle_density"] == pytest.approx(target, rel=1e-3)


def test_far_probe_vanishes():
    hist = shrinking_circle_history()
    probe = DensityProbe(SpacetimePoint((20.0, 0.0), 0.5), math.inf, CIRCLE_R)
    assert gaussian_density(hist, probe)[:, 1].max() <= 1e-6


def test_density_probe_validation():
    with pytest.raises(ValueError):
        DensityProbe(ORIGIN, 1.0, (0.5, 1.5))
    with pytest.raises(ValueError):
        DensityProbe(ORIGIN, 0.0, (0.1,))


def test_monotonicity_equality_case():
    hist = shrinking_circle_history()
    rep = monotonicity_report(hist, DensityProbe(SpacetimePoint((0.0, 0.0), 0.5), math.inf, CIRCLE_R))
    assert rep.max_violation <= 1e-3
    assert np.abs(rep.defect).max() <= 1e-3


def test_grim_reaper_is_not_a_shrinker():
    p = np.linspace(-1.5, 1.5, 801)
    r_grid = (1.0, 0.7, 0.5, 0.3)
    hist = FlowHistory.from_states([FlowState(grim_reaper(1.0 - r * r, p), 1.0 - r * r) for r in r_grid])
    rep = monotonicity_report(hist, DensityProbe(SpacetimePoint((0.0, 1.0), 1.0), math.inf, r_grid))
    assert np.all(np.asarray(rep.defect) > 0)


def test_off_axis_probe_matches_curve_rotation():
    # a sphere probed off the axis equals the same probe rotated onto the axis
    sol = SphereSolution(1.0, 2)
    hist = FlowHistory.from_states([FlowState(sphere_at(sol, t, 801), t) for t in (0.0, 0.05, 0.1)])
    a = math.sqrt(0.5)
    on = DensityProbe(SpacetimePoint((1.0, 0.0), 0.2), math.inf, (math.sqrt(0.1), math.sqrt(0.2)))
    off = DensityProbe(SpacetimePoint((a, a), 0.2), math.inf, (math.sqrt(0.1), math.sqrt(0.2)))
    np.testing.assert_allclose(gaussian_density(hist, off)[:, 1], gaussian_density(hist, on)[:, 1], rtol=1e-5)


# --------------------------------------------------------------------------- reference densities


@pytest.mark.parametrize("n", [1, 2, 3])
def test_reference_densities(n):
    table = reference_densities(n)
    stored = frozen()["reference_densities"][str(n)]
    for label, entry in table.items():
        assert entry["value"] == pytest.approx(entry["closed_form"], rel=1e-6)
        assert entry["value"] == pytest.approx(stored[label], rel=1e-12)
    assert table["sphere"]["closed_form"] == sphere_density_closed_form(n)


def test_classification():
    assert classify_tangent_flow(1.0, 1).label == "plane"
    assert classify_tangent_flow(frozen()["circle_density"], 1).label == "sphere"
    assert classify_tangent_flow(3.7, 1).label == "unclassified"
    cyl = reference_densities(2)["cylinder_1"]["value"]
    assert classify_tangent_flow(cyl, 2).label == "cylinder_1"
    with pytest.raises(NonPositiveDensity):
        classify_tangent_flow(0.0)
    rec = classify_tangent_flow(1.0, 2).record()
    assert rec.startswith("label=plane") and "\n" not in rec


# --------------------------------------------------------------------------- noncollapsing


def test_andrews_circle():
    g = sphere_at(SphereSolution(1.0, 1), 0.0, 512)
    rep = andrews_quantities(g)
    np.testing.assert_allclose(rep.Z_star, 1.0, rtol=1e-3)
    assert rep.alpha == pytest.approx(1.0, abs=0.02)
    assert np.all(rep.Z_lower <= rep.Z_star)
    assert frozen()["andrews"]["circle"] == pytest.approx(rep.alpha, rel=1e-6)


def test_andrews_sphere():
    rep = andrews_quantities(sphere_at(SphereSolution(2.0, 2), 0.0, 257))
    assert rep.alpha_interior == pytest.approx(2.0, rel=0.02)


def test_andrews_dumbbell_neck_trend():
    alphas = [andrews_quantities(dumbbell(DumbbellSpec(neck_radius=a), 400)).alpha for a in (0.4, 0.3, 0.2)]
    assert alphas[0] > alphas[1] > alphas[2]
    assert max(alphas) < 1.0


def test_andrews_rejects_open_or_nonconvex():
    with pytest.raises(ValueError):
        andrews_quantities(grim_reaper(0.0, np.linspace(-1, 1, 64)))
    th = 2 * np.pi * np.arange(200) / 200
    r = 1 + 0.5 * np.cos(3 * th)
    with pytest.raises(NotMeanConvex):
        andrews_quantities(PolyCurve(np.column_stack([r * np.cos(th), r * np.sin(th)])))


@pytest.mark.property
@pytest.mark.parametrize(
    "make",
    [
        lambda: ellipse_curve(2.0, 1.0, 256),
        lambda: sphere_at(SphereSolution(1.0, 1), 0.0, 200),
        lambda: ellipsoid_profile(2.0, 1.0, 64),
        lambda: dumbbell(DumbbellSpec(), 96),
    ],
    ids=["ellipse", "circle", "ellipsoid", "dumbbell"],
)
def test_andrews_bruteforce_equivalence(make):
    g = make()
    rep = andrews_quantities(g)
    zs, zl = andrews_bruteforce(g)
    np.testing.assert_allclose(rep.Z_star, zs, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(rep.Z_lower, zl, rtol=1e-12, atol=1e-12)


# --------------------------------------------------------------------------- convexity


def test_convexity_ratio_examples():
    for n in (2, 3):
        assert convexity_ratio(sphere_at(SphereSolution(1.0, n), 0.0, 400)).value == pytest.approx(1 / n, abs=1e-3)
    cyl = quantities(cylinder_at(CylinderSolution(0.5, 2), 0.0, 3.0, 64))
    assert np.abs(cyl.lambda1[1:-1] / cyl.H[1:-1]).max() < 1e-12
    rep = convexity_ratio(dumbbell(DumbbellSpec(), 600))
    assert rep.value < 0


def test_convexity_trend_at_pinch():
    g = dumbbell(DumbbellSpec(), 400)
    hist = evolve(
        FlowState(g, 0.0), [StopCriterion.blowup(500.0)], 10**9, params=EngineParams(resolution=0.1), record_scale=0.05
    )
    H0 = quantities(g).H.max()
    ratios = []
    for s in hist.snapshots:
        q = quantities(s.single)
        i = int(np.argmax(q.H))
        if q.H[i] >= 10 * H0:
            ratios.append(q.lambda1[i] / q.H[i])
    assert len(ratios) > 5
    assert np.diff(ratios).min() >= -1e-2


# --------------------------------------------------------------------------- area ratios


def test_area_ratio_examples():
    assert area_ratio(straight_line(), (0.3, 0.0), 0.7) == pytest.approx(1.0, abs=1e-3)
    circle = sphere_at(SphereSolution(1.0, 1), 0.0, 2048)
    v = area_ratio(circle, (1.0, 0.0), 0.1)
    assert 1.0 <= v <= 1.01
    assert area_ratio(circle, (5.0, 0.0), 1.0) == 0.0
    with pytest.raises(ValueError):
        area_ratio(circle, (0.0, 0.0), 0.0)


def test_area_ratio_sphere_pole():
    # a small ball about the pole of the unit sphere sees a nearly flat disc
    s = sphere_at(SphereSolution(1.0, 2), 0.0, 2001)
    assert area_ratio(s, (1.0, 0.0), 0.05) == pytest.approx(1.0, abs=5e-3)
