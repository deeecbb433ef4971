import math

import numpy as np
import pytest
from shapely import ops
from shapely.geometry import Polygon

from conftest import run_config
from mcflab.errors import StepTooLarge, UncoveredTime
from mcflab.exact import DumbbellSpec, SphereSolution, dumbbell, ellipse_curve, grim_reaper, grim_reaper_height, sphere_at
from mcflab.flow import (
    DENSE_COLUMNS,
    EngineParams,
    FlowHistory,
    FlowState,
    StopCriterion,
    area_decay_defect,
    area_decay_defects,
    choose_dt,
    evolve,
    pair_distance,
    step,
)
from mcflab.geometry import PolyCurve, SpacetimePoint, quantities, total_area


def circle(R, N):
    th = 2 * np.pi * np.arange(N) / N
    return PolyCurve(R * np.column_stack([np.cos(th), np.sin(th)]))


def mean_radius(g):
    return float(np.mean(np.hypot(*g.coords.T)))


# --------------------------------------------------------------------------- step size


def test_choose_dt_formula():
    c = circle(1.0, 256)
    h = 2 * math.sin(math.pi / 256)
    expected = 0.5 * h * h / (2 + h * quantities(c).H.max())
    assert choose_dt(FlowState(c, 0.0), 0.5) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(0.5 * (2 * math.pi / 256) ** 2 / 2, rel=0.02)


def test_choose_dt_shrinks_with_curvature():
    dts = [choose_dt(FlowState(circle(R, 64), 0.0)) for R in (1.0, 0.1, 0.01, 0.001)]
    assert all(a > b > 0 for a, b in zip(dts, dts[1:]))


@pytest.mark.parametrize("cfl", [0.0, -1.0, 1.5])
def test_choose_dt_rejects_cfl(cfl):
    with pytest.raises(ValueError):
        choose_dt(FlowState(circle(1.0, 64), 0.0), cfl)


# --------------------------------------------------------------------------- single steps


def test_step_circle():
    s = FlowState(circle(1.0, 512), 0.0)
    dt = choose_dt(s)
    out = step(s, dt)
    assert out.time == dt and out.step_index == 1
    assert mean_radius(out.single) == pytest.approx(math.sqrt(1 - 2 * dt), rel=1e-6)


def test_step_sphere():
    s = FlowState(sphere_at(SphereSolution(1.0, 2), 0.0, 200), 0.0)
    out = step(s, 1e-4)
    assert mean_radius(out.single) == pytest.approx(math.sqrt(1 - 4e-4), rel=1e-5)


def test_step_grim_reaper():
    p = np.linspace(-1.2, 1.2, 512)
    s = FlowState(grim_reaper(0.0, p), 0.0)
    dt = choose_dt(s)
    q = step(s, dt).single.coords
    inner = np.abs(q[:, 0]) <= 1.0
    assert np.abs(q[inner, 1] - grim_reaper_height(dt, q[inner, 0])).max() <= 1e-3


def test_step_rejects_unstable_dt():
    s = FlowState(circle(1.0, 128), 0.0)
    with pytest.raises(StepTooLarge):
        step(s, 10 * choose_dt(s, 1.0))


def test_single_step_area_defect():
    s = FlowState(ellipse_curve(2.0, 1.0, 512), 0.0)
    d, nxt = area_decay_defect(s, choose_dt(s))
    assert d <= 0.02
    assert total_area(nxt.single) < total_area(s.single)


# --------------------------------------------------------------------------- evolve


def test_evolve_circle_extinction():
    hist = run_config("circle_extinction.ini")
    assert hist.events_of("extinction")[-1].time == pytest.approx(0.5, rel=0.01)


def test_evolve_sphere_extinction():
    hist = run_config("sphere_extinction.ini")
    assert hist.events_of("extinction")[-1].time == pytest.approx(0.25, rel=0.01)


def test_evolve_dumbbell_blowup():
    g = dumbbell(DumbbellSpec(), 400)
    hist = evolve(FlowState(g, 0.0), [StopCriterion.blowup(200.0)], 10**9, params=EngineParams(resolution=0.1))
    assert [e.kind for e in hist.events] == ["blowup_stop"]
    p = hist.final.single.coords
    assert p[np.abs(p[:, 0]) < 0.5, 1].min() <= 0.02


def test_evolve_horizon_and_record_times():
    hist = evolve(
        FlowState(circle(1.0, 128), 0.0),
        [StopCriterion.horizon(0.2)],
        10**9,
        record_times=[0.05, 0.1],
    )
    t = hist.times
    assert t[0] == 0.0 and 0.05 in t and 0.1 in t and t[-1] == pytest.approx(0.2)
    assert np.all(np.diff(t) > 0)
    assert hist.dense_scalars.shape[1] == len(DENSE_COLUMNS)


def test_history_slices():
    hist = run_config("circles.ini")
    assert hist.slice_at(0.1).time == pytest.approx(0.1)
    with pytest.raises(UncoveredTime):
        hist.slice_at(0.5)
    assert not hist.covers(-1.0)


def test_history_events_have_snapshots():
    hist = run_config("circle_extinction.ini")
    times = hist.times
    assert np.all(np.diff(times) >= 0)
    for e in hist.events:
        assert np.any(times == e.time)


def test_rescaled_history():
    hist = run_config("circles.ini")
    r = hist.rescaled(SpacetimePoint((0.0, 0.0), 0.0), 2.0)
    assert r.times[-1] == pytest.approx(4 * 0.3)
    a, b = hist.final.components[0], r.final.components[0]
    np.testing.assert_allclose(b.coords, 2 * a.coords)


# --------------------------------------------------------------------------- monitored properties


@pytest.mark.parametrize("name", ["ellipse.ini", "dumbbell_no_surgery.ini", "sphere_extinction.ini"])
def test_mean_convexity_preserved(name):
    hist = run_config(name)
    minH, maxH = hist.column("minH"), hist.column("maxH")
    ok = np.isfinite(minH)
    assert np.all(minH[ok] >= -1e-6 * maxH[ok])


def test_circle_curvature_evolution():
    # for the circle, kappa_ss = 0 and dkappa/dt = kappa^3
    d = run_config("circle_extinction.ini").dense_scalars
    t, k = d[:, 0], d[:, DENSE_COLUMNS.index("maxH")]
    keep = np.where(k <= 10.0)[0]
    keep = keep[(keep > 0) & (keep < len(t) - 1)]
    rate = (k[keep + 1] - k[keep - 1]) / (t[keep + 1] - t[keep - 1])
    assert np.abs(rate / k[keep] ** 3 - 1).max() <= 0.05


def test_round_point_convergence():
    hist = run_config("ellipse.ini")
    a0 = total_area(hist.snapshots[0].single)
    late = [s.single for s in hist.snapshots if s.components and total_area(s.single) < 0.01 * a0]
    assert late
    g = late[-1]
    poly = Polygon(g.coords)
    r_in = poly.exterior.distance(ops.polylabel(poly, 1e-8))
    assert quantities(g).H.max() * r_in == pytest.approx(1.0, abs=0.05)


def test_area_decay_defects_need_record():
    h = FlowHistory.from_states([FlowState(circle(1.0, 64), t) for t in (0.0, 0.1)])
    with pytest.raises(ValueError):
        area_decay_defects(h)


# --------------------------------------------------------------------------- pair distance


def test_pair_distance_concentric():
    a, b = FlowState(circle(1.0, 256), 0.0), FlowState(circle(2.0, 256), 0.0)
    assert pair_distance(a, b) == pytest.approx(1.0, rel=1e-3)


def test_pair_distance_circles_flow():
    hist = run_config("circles.ini")
    s = hist.slice_at(0.3)
    inner, outer = s.components
    d = pair_distance(s.replace([inner]), s.replace([outer]))
    assert d == pytest.approx(math.sqrt(3.4) - math.sqrt(0.4), abs=1e-2)


def test_pair_distance_translated_spheres():
    s1 = sphere_at(SphereSolution(1.0, 2), 0.0, 200)
    s2 = s1.with_coords(s1.coords + [3.5, 0.0])
    assert pair_distance(FlowState(s1, 0.0), FlowState(s2, 0.0)) == pytest.approx(1.5, abs=1e-4)


def test_pair_distance_dimension_mismatch():
    with pytest.raises(ValueError):
        pair_distance(FlowState(circle(1.0, 64), 0.0), FlowState(sphere_at(SphereSolution(1.0, 2), 0.0, 64), 0.0))


# --------------------------------------------------------------------------- determinism


@pytest.mark.property
def test_evolve_is_deterministic():
    def run():
        g = dumbbell(DumbbellSpec(), 300)
        return evolve(FlowState(g, 0.0), [StopCriterion.blowup(30.0)], 50, params=EngineParams(resolution=0.1))

    a, b = run(), run()
    assert np.array_equal(a.dense_scalars, b.dense_scalars, equal_nan=True)
    assert len(a.snapshots) == len(b.snapshots)
    for x, y in zip(a.snapshots, b.snapshots):
        assert np.array_equal(x.single.coords, y.single.coords)
