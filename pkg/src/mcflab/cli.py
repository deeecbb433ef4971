"""Command-line driver: ``mcflab run|probe|oracle|compare``.

Configuration files are INI-style (``key = value`` under ``[section]``) and
unknown sections or keys are rejected.  Exit codes:

====  ==========================================================
0     clean stop (or comparison within tolerance)
1     comparison outside tolerance
2     configuration error or unknown preset
3     probe time not covered by the history
4     oracle and history time grids differ
5     self-intersection during the flow
6     trigger fired but no neck collection separates
7     numerical breakdown (degenerate edge, axis crossing, ...)
====  ==========================================================
"""

from __future__ import annotations

import argparse
import configparser
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import exact
from .diagnostics import (
    DensityProbe,
    andrews_quantities,
    classify_tangent_flow,
    monotonicity_report,
    reference_densities,
)
from .errors import (
    ConfigError,
    GridMismatch,
    InvalidSpec,
    MCFError,
    NoSeparatingNecks,
    UncoveredTime,
)
from .flow import EngineParams, FlowHistory, FlowState, StopCriterion, evolve
from .geometry import PolyCurve, SpacetimePoint, hausdorff_distance, total_area
from .io import read_history, read_snapshot, write_andrews_report, write_csv, write_history, write_probe_report
from .surgery import SurgeryParams, SurgeryParamWarning, surgery_flow

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_CONFIG = 2
EXIT_UNCOVERED = 3
EXIT_GRID = 4
EXIT_SELF_INTERSECTION = 5
EXIT_NO_NECKS = 6
EXIT_BREAKDOWN = 7

PRESETS = ("sphere", "ellipse", "dumbbell", "triple-bulb", "grim-reaper", "circles", "cylinder", "snapshot")
ORACLES = ("sphere", "cylinder", "grim-reaper", "reference-densities")


def _floats(text: str) -> list:
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def _bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_GEOM = {
    "n": int,
    "N": int,
    "R0": float,
    "radii": _floats,
    "a": float,
    "b": float,
    "length": float,
    "p_max": float,
    "bulb_radius": float,
    "right_bulb_radius": float,
    "neck_radius": float,
    "neck_halflength": float,
    "smoothing": float,
    "dent_depth": float,
    "dent_width": float,
}

SCHEMA = {
    "run": {"preset": str, "snapshot": str, "out": str, "seed": int, "frames": _bool},
    "geometry": _GEOM,
    "engine": {
        "cfl": float,
        "stride": int,
        "resolution": float,
        "remesh_ratio": float,
        "grade": float,
        "alpha_stride": int,
        "record_scale": float,
        "record_times": _floats,
    },
    "stop": {"horizon": float, "extinction": float, "blowup": float, "trigger": float},
    "surgery": {
        "delta": float,
        "H_th": float,
        "H_neck": float,
        "H_trig": float,
        "alpha": float,
        "beta": float,
        "gamma": float,
        "Gamma": float,
        "mu": float,
    },
    "probe": {"center": _floats, "t0": str, "rho": float, "r_grid": _floats},
    "oracle": {"name": str, "times": _floats},
    "compare": {"oracle": str, "tol_radius": float, "tol_hausdorff": float},
}


@dataclass
class ExperimentConfig:
    """Validated contents of a configuration file."""

    sections: dict = field(default_factory=dict)
    probes: dict = field(default_factory=dict)
    path: Path | None = None

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    def has(self, section: str) -> bool:
        return section in self.sections


def parse_config(text: str, path: Path | None = None) -> ExperimentConfig:
    """Parse and validate configuration text; raises :class:`ConfigError`."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    cfg = ExperimentConfig(path=path)
    for name in cp.sections():
        base = "probe" if name.startswith("probe.") else name
        if base not in SCHEMA:
            raise ConfigError(f"unknown section [{name}]")
        values = {}
        for key, raw in cp.items(name):
            if key not in SCHEMA[base]:
                raise ConfigError(f"unknown key {key!r} in section [{name}]")
            try:
                values[key] = SCHEMA[base][key](raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r} in [{name}]: {exc}") from None
        if base == "probe":
            cfg.probes[name] = values
        else:
            cfg.sections[name] = values
    _check_ranges(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"configuration file {path} does not exist")
    cfg = parse_config(path.read_text(), path)
    snap = cfg.get("run", "snapshot")
    if snap is not None and not _resolve(cfg, snap).exists():
        raise ConfigError(f"snapshot file {snap} does not exist")
    return cfg


def _resolve(cfg: ExperimentConfig, name: str) -> Path:
    p = Path(name)
    if not p.is_absolute() and cfg.path is not None:
        p = cfg.path.parent / p
    return p


def _check_ranges(cfg: ExperimentConfig):
    def need(section, key, ok, what):
        v = cfg.get(section, key)
        if v is not None and not ok(v):
            raise ConfigError(f"{key} = {v!r} in [{section}] must be {what}")

    need("geometry", "n", lambda v: v >= 1, ">= 1")
    need("geometry", "N", lambda v: v >= 8, ">= 8")
    for key in ("R0", "a", "b", "length", "p_max", "bulb_radius", "neck_radius", "smoothing"):
        need("geometry", key, lambda v: v > 0, "positive")
    need("geometry", "p_max", lambda v: v < math.pi / 2, "below pi/2")
    need("engine", "cfl", lambda v: 0 < v <= 1, "in (0, 1]")
    need("engine", "stride", lambda v: v >= 1, ">= 1")
    need("engine", "resolution", lambda v: v > 0, "positive")
    need("engine", "remesh_ratio", lambda v: v > 1, "> 1")
    need("engine", "alpha_stride", lambda v: v >= 0, ">= 0")
    need("engine", "record_scale", lambda v: v > 0, "positive")
    for key in ("extinction", "blowup", "trigger"):
        need("stop", key, lambda v: v > 0, "positive")
    preset = cfg.get("run", "preset")
    if preset is not None and preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
    for name, pr in cfg.probes.items():
        if "center" in pr and len(pr["center"]) != 2:
            raise ConfigError(f"center in [{name}] needs two coordinates")
        if "rho" in pr and not pr["rho"] > 0:
            raise ConfigError(f"rho in [{name}] must be positive")


# --------------------------------------------------------------------------- building runs


def initial_state(cfg: ExperimentConfig) -> FlowState:
    """Initial data described by ``[run] preset`` and ``[geometry]``."""
    preset = cfg.get("run", "preset", "snapshot" if cfg.get("run", "snapshot") else None)
    g = cfg.sections.get("geometry", {})
    n = g.get("n", 2)
    N = g.get("N", 512)
    try:
        if preset == "snapshot":
            snap = cfg.get("run", "snapshot")
            if snap is None:
                raise ConfigError("preset 'snapshot' needs [run] snapshot = PATH")
            return read_snapshot(_resolve(cfg, snap))
        if preset == "sphere":
            return FlowState(exact.sphere_at(exact.SphereSolution(g.get("R0", 1.0), n), 0.0, N), 0.0)
        if preset == "ellipse":
            a, b = g.get("a", 2.0), g.get("b", 1.0)
            geo = exact.ellipse_curve(a, b, N) if n == 1 else exact.ellipsoid_profile(a, b, N, n)
            return FlowState(geo, 0.0)
        if preset == "dumbbell":
            spec = exact.DumbbellSpec(
                bulb_radius=g.get("bulb_radius", 1.0),
                neck_radius=g.get("neck_radius", 0.2),
                neck_halflength=g.get("neck_halflength", 1.5),
                smoothing=g.get("smoothing", 0.5),
                right_bulb_radius=g.get("right_bulb_radius"),
                dent_depth=g.get("dent_depth", 0.0),
                dent_width=g.get("dent_width", 0.5),
            )
            return FlowState(exact.dumbbell(spec, N, n), 0.0)
        if preset == "triple-bulb":
            geo = exact.triple_bulb(
                tuple(g.get("radii", (1.0, 1.0, 1.0))),
                g.get("neck_radius", 0.2),
                g.get("neck_halflength", 1.5),
                g.get("smoothing", 0.5),
                N,
                n,
            )
            return FlowState(geo, 0.0)
        if preset == "grim-reaper":
            p_max = g.get("p_max", 1.2)
            return FlowState(exact.grim_reaper(0.0, np.linspace(-p_max, p_max, N)), 0.0)
        if preset == "circles":
            radii = g.get("radii", (1.0, 2.0))
            comps = tuple(exact.sphere_at(exact.SphereSolution(r, 1), 0.0, N) for r in radii)
            return FlowState(comps, 0.0)
        if preset == "cylinder":
            raise ConfigError("the cylinder preset is an oracle only; it cannot be flowed")
    except InvalidSpec as exc:
        raise ConfigError(f"invalid geometry: {exc}") from None
    raise ConfigError("no initial data: set [run] preset or [run] snapshot")


def engine_params(cfg: ExperimentConfig) -> EngineParams:
    e = cfg.sections.get("engine", {})
    return EngineParams(
        cfl=e.get("cfl", 0.4),
        remesh_ratio=e.get("remesh_ratio", 2.0),
        resolution=e.get("resolution"),
        grade=e.get("grade", 0.25),
        alpha_stride=e.get("alpha_stride", 0),
    )


def stop_criteria(cfg: ExperimentConfig) -> list:
    s = cfg.sections.get("stop", {})
    out = []
    if "horizon" in s:
        out.append(StopCriterion.horizon(s["horizon"]))
    if "extinction" in s:
        out.append(StopCriterion.extinction(s["extinction"]))
    if "blowup" in s:
        out.append(StopCriterion.blowup(s["blowup"]))
    if "trigger" in s:
        out.append(StopCriterion.trigger(s["trigger"]))
    if not out:
        raise ConfigError("[stop] needs at least one of horizon, extinction, blowup, trigger")
    return out


def surgery_params(cfg: ExperimentConfig) -> SurgeryParams | None:
    if not cfg.has("surgery"):
        return None
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SurgeryParamWarning)
            return SurgeryParams(**cfg.sections["surgery"])
    except InvalidSpec as exc:
        raise ConfigError(f"invalid surgery parameters: {exc}") from None


def probe_times(cfg: ExperimentConfig, extinction: float | None = None) -> list:
    """Slice times ``t0 - r^2`` needed by the configured probes.

    Probes anchored at ``extinction`` contribute only when that time is given.
    """
    out = []
    for name, spec in cfg.probes.items():
        t0 = spec.get("t0", "final")
        if t0 == "extinction":
            if extinction is None:
                continue
            t0 = extinction
        elif t0 == "final":
            continue
        else:
            try:
                t0 = float(t0)
            except ValueError:
                raise ConfigError(f"bad probe time {t0!r} in [{name}]") from None
        out.extend(t0 - r * r for r in spec.get("r_grid", ()))
    return sorted(t for t in out if t > 0)


def _needs_extinction(cfg: ExperimentConfig) -> bool:
    return any(spec.get("t0") == "extinction" for spec in cfg.probes.values())


def execute(cfg: ExperimentConfig, stride: int | None = None) -> FlowHistory:
    """Run the flow (with surgery when configured) and return its history.

    Probe slices are recorded exactly.  When a probe is anchored at the
    extinction time, a first pass locates it and a second pass records the
    slices; the integrator is deterministic so both passes agree.

    :class:`NoSeparatingNecks` propagates; its ``dump`` carries the history.
    """
    hist = _execute(cfg, stride, probe_times(cfg))
    if _needs_extinction(cfg) and not cfg.has("surgery"):
        ext = hist.events_of("extinction")
        if ext:
            hist = _execute(cfg, stride, probe_times(cfg, ext[-1].time))
    return hist


def _execute(cfg: ExperimentConfig, stride, extra_times) -> FlowHistory:
    state = initial_state(cfg)
    try:
        params = engine_params(cfg)
    except ValueError as exc:
        raise ConfigError(f"invalid engine parameters: {exc}") from None
    e = cfg.sections.get("engine", {})
    record = stride or e.get("stride", 1)
    sp = surgery_params(cfg)
    if sp is not None:
        s = cfg.sections.get("stop", {})
        return surgery_flow(
            state,
            sp,
            s.get("horizon", math.inf),
            engine=params if params.resolution is not None else EngineParams(resolution=0.1, cfl=params.cfl),
            extinction=s.get("extinction", 1e-4),
            record=record if stride or "stride" in e else 10**9,
            record_scale=e.get("record_scale", 0.01),
        )
    return evolve(
        state,
        stop_criteria(cfg),
        record,
        params=params,
        record_times=sorted(set(e.get("record_times", ())) | set(extra_times)),
        record_scale=e.get("record_scale"),
    )


# --------------------------------------------------------------------------- commands


def _status_code(history: FlowHistory) -> int:
    return {"ok": EXIT_OK, "self_intersection": EXIT_SELF_INTERSECTION}.get(history.status, EXIT_BREAKDOWN)


def cmd_run(cfg: ExperimentConfig, out=None, frames: bool = False, stride: int | None = None) -> int:
    out = Path(out or cfg.get("run", "out", "mcflab-out"))
    frames = frames or cfg.get("run", "frames", False)
    try:
        hist = execute(cfg, stride)
    except NoSeparatingNecks as exc:
        dump = exc.dump or {}
        if "history" in dump:
            write_history(out, dump["history"], frames)
        _report(f"no separating necks: {exc}")
        return EXIT_NO_NECKS
    write_history(out, hist, frames)
    final = hist.info.get("final_state")
    area = sum(total_area(g) for g in final.components) if final is not None and final.components else 0.0
    print(f"status={hist.status} time={float(hist.times[-1])!r} snapshots={len(hist)} final_area={area!r}")
    return _status_code(hist)


def _probe_from(spec: dict, history: FlowHistory) -> DensityProbe:
    if "center" not in spec or "r_grid" not in spec:
        raise ConfigError("a probe needs center and r_grid")
    t0 = spec.get("t0", "final")
    if t0 in ("final", "extinction"):
        ext = history.events_of("extinction")
        t0 = ext[-1].time if (t0 == "extinction" and ext) else float(history.times[-1])
    else:
        try:
            t0 = float(t0)
        except ValueError:
            raise ConfigError(f"bad probe time {t0!r}") from None
    try:
        return DensityProbe(SpacetimePoint(tuple(spec["center"]), t0), spec.get("rho", math.inf), spec["r_grid"])
    except ValueError as exc:
        raise ConfigError(f"invalid probe: {exc}") from None


def _dimension(history: FlowHistory) -> int:
    g = history.snapshots[0].components[0]
    return 1 if isinstance(g, PolyCurve) else g.n


def cmd_probe(history_dir, probes: dict, out=None, andrews: bool = False) -> int:
    """Density reports and classification records for every probe."""
    hist = read_history(history_dir)
    out = Path(out or history_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = _dimension(hist)
    records = []
    for name, spec in probes.items():
        probe = _probe_from(spec, hist)
        tag = "" if name == "probe" else "_" + name.split(".", 1)[1]
        try:
            rep = monotonicity_report(hist, probe)
        except UncoveredTime as exc:
            _report(f"{name}: {exc}")
            return EXIT_UNCOVERED
        write_probe_report(out / f"probe{tag}.csv", rep)
        cls = classify_tangent_flow(float(rep.theta[-1]), n)
        records.append(f"{name} max_violation={rep.max_violation!r} {cls.record()}")
    (out / "classification.txt").write_text("\n".join(records) + "\n")
    if andrews:
        g = hist.final.components[0]
        write_andrews_report(out / "andrews.csv", andrews_quantities(g))
    for r in records:
        print(r)
    return EXIT_OK


def cmd_oracle(name: str, cfg: ExperimentConfig, out) -> int:
    """Exact-solution snapshots on a time grid, or the reference density table."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if name not in ORACLES:
        raise ConfigError(f"unknown oracle {name!r}; choose from {', '.join(ORACLES)}")
    if name == "reference-densities":
        rows = []
        for n in (1, 2, 3):
            for label, entry in reference_densities(n).items():
                rows.append([n, label, entry["value"], entry["closed_form"], entry["method"]])
        path = out / "reference_densities.csv"
        with open(path, "w", encoding="ascii", newline="") as fh:
            fh.write("# tangent-flow Gaussian densities at t0 - t = 1, centre at the origin\n")
            fh.write("# value: quadrature over the exact shrinking solution; closed_form: |S^k| (k/(2 pi e))^(k/2)\n")
        with open(path, "a", encoding="ascii", newline="") as fh:
            import csv

            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "label", "value", "closed_form", "method"])
            for r in rows:
                w.writerow([r[0], r[1], repr(float(r[2])), repr(float(r[3])), r[4]])
        return EXIT_OK
    g = cfg.sections.get("geometry", {})
    times = cfg.get("oracle", "times", [0.0])
    N = g.get("N", 512)
    n = g.get("n", 2)
    states = []
    try:
        for t in times:
            if name == "sphere":
                geo = exact.sphere_at(exact.SphereSolution(g.get("R0", 1.0), n), t, N)
            elif name == "cylinder":
                geo = exact.cylinder_at(exact.CylinderSolution(g.get("R0", 1.0), n), t, g.get("length", 4.0), N)
            else:
                p_max = g.get("p_max", 1.2)
                geo = exact.grim_reaper(t, np.linspace(-p_max, p_max, N))
            states.append(FlowState(geo, t))
    except MCFError as exc:
        raise ConfigError(f"oracle {name}: {exc}") from None
    write_history(out, FlowHistory.from_states(states))
    return EXIT_OK


def _mean_radius(g) -> float:
    return float(np.mean(np.hypot(*np.asarray(g.coords).T)))


def cmd_compare(history_dir, oracle_dir, out=None, tol_radius: float = 1e-2, tol_hausdorff: float = 1e-2) -> int:
    """Per-time Hausdorff distance and radius error against an oracle history."""
    hist = read_history(history_dir)
    orc = read_history(oracle_dir)
    times = hist.times
    rows = []
    for snap in orc.snapshots:
        t = snap.time
        j = int(np.argmin(np.abs(times - t))) if len(times) else -1
        if j < 0 or abs(times[j] - t) > 1e-9 * max(1.0, abs(t)):
            raise GridMismatch(f"history has no snapshot at oracle time {t!r}")
        a, b = hist.snapshots[j].components, snap.components
        if len(a) != len(b):
            raise GridMismatch(f"component count differs at t={t!r}")
        hd = max(hausdorff_distance(x, y) for x, y in zip(a, b))
        ra, rb = _mean_radius(a[0]), _mean_radius(b[0])
        da = abs(sum(total_area(x) for x in a) - sum(total_area(y) for y in b))
        rows.append([t, hd, abs(ra - rb) / rb, da])
    out = Path(out or history_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "compare.csv", ["time", "hausdorff", "radius_rel_error", "area_delta"], rows)
    arr = np.array([r[1:3] for r in rows]) if rows else np.zeros((0, 2))
    worst_h = float(arr[:, 0].max()) if len(arr) else 0.0
    worst_r = float(arr[:, 1].max()) if len(arr) else 0.0
    print(f"max_hausdorff={worst_h!r} max_radius_rel_error={worst_r!r}")
    return EXIT_OK if worst_h <= tol_hausdorff and worst_r <= tol_radius else EXIT_TOLERANCE


# --------------------------------------------------------------------------- entry point


def _report(msg: str):
    print(f"mcflab: {msg}", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mcflab", description="Mean curvature flow laboratory.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="INI configuration file")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--frames", action="store_true", help="write SVG frames")
        p.add_argument("--stride", type=int, help="record every K-th step")

    p = sub.add_parser("run", help="evolve initial data and write a history")
    common(p)
    p = sub.add_parser("probe", help="Gaussian density probes on a history")
    common(p)
    p.add_argument("history", type=Path)
    p.add_argument("--center", help="x,y of the probe centre")
    p.add_argument("--t0", help="probe time, 'final' or 'extinction'")
    p.add_argument("--rho", type=float, default=math.inf)
    p.add_argument("--r", dest="r_grid", help="comma-separated scales")
    p.add_argument("--andrews", action="store_true", help="also write the Andrews report of the final slice")
    p = sub.add_parser("oracle", help="emit exact solutions or reference densities")
    common(p)
    p.add_argument("name")
    p.add_argument("--times", help="comma-separated time grid")
    p = sub.add_parser("compare", help="compare a history with an oracle history")
    common(p)
    p.add_argument("history", type=Path)
    p.add_argument("oracle", type=Path, nargs="?")
    p.add_argument("--tol-radius", type=float)
    p.add_argument("--tol-hausdorff", type=float)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.stride is not None and args.stride < 1:
        _report("--stride must be at least 1")
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        if args.command == "run":
            if args.config is None:
                raise ConfigError("run needs --config")
            return cmd_run(cfg, args.out, args.frames, args.stride)
        if args.command == "probe":
            probes = dict(cfg.probes)
            if args.center or args.r_grid:
                spec = {"center": _floats(args.center or "0,0"), "r_grid": _floats(args.r_grid or "")}
                if args.t0:
                    spec["t0"] = args.t0
                spec["rho"] = args.rho
                probes["probe"] = spec
            if not probes:
                raise ConfigError("no probe given (use [probe] sections or --center/--r)")
            return cmd_probe(args.history, probes, args.out, args.andrews)
        if args.command == "oracle":
            if args.times:
                cfg.sections.setdefault("oracle", {})["times"] = _floats(args.times)
            return cmd_oracle(args.name, cfg, args.out or Path("mcflab-oracle"))
        if args.command == "compare":
            oracle = args.oracle or (cfg.get("compare", "oracle") and _resolve(cfg, cfg.get("compare", "oracle")))
            if not oracle:
                raise ConfigError("compare needs an oracle directory")
            return cmd_compare(
                args.history,
                oracle,
                args.out,
                args.tol_radius if args.tol_radius is not None else cfg.get("compare", "tol_radius", 1e-2),
                args.tol_hausdorff if args.tol_hausdorff is not None else cfg.get("compare", "tol_hausdorff", 1e-2),
            )
    except ConfigError as exc:
        _report(str(exc))
        return EXIT_CONFIG
    except UncoveredTime as exc:
        _report(str(exc))
        return EXIT_UNCOVERED
    except GridMismatch as exc:
        _report(str(exc))
        return EXIT_GRID
    return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
