"""Plain-text formats for snapshots, histories, reports and SVG frames.

Snapshot files hold one or more components, each introduced by the header
``MCFLAB v1 <kind> <n> <N> <time>`` followed by ``N`` lines ``x y``.  Floats
are written with ``repr`` so a write/read/write cycle is bit-identical.
"""

from __future__ import annotations

import csv
import math
import os
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .flow import DENSE_COLUMNS, Event, FlowHistory, FlowState
from .geometry import AXIS_TO_AXIS, OFF_AXIS_LOOP, OPEN_SEGMENT, AxisymProfile, Geometry, PolyCurve

MAGIC = "MCFLAB"
VERSION = "v1"
_CLOSURES = {"axisym-open": AXIS_TO_AXIS, "axisym-loop": OFF_AXIS_LOOP, "axisym-segment": OPEN_SEGMENT}


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


# --------------------------------------------------------------------------- snapshots


def format_geometry(g: Geometry, time: float) -> str:
    p = np.asarray(g.coords)
    lines = [f"{MAGIC} {VERSION} {g.kind} {g.n} {len(p)} {float(time)!r}"]
    lines.extend(f"{float(x)!r} {float(y)!r}" for x, y in p)
    return "\n".join(lines) + "\n"


def write_snapshot(path, state_or_geometry, time: float | None = None) -> None:
    """Write a geometry (with ``time``) or every component of a :class:`FlowState`."""
    if isinstance(state_or_geometry, FlowState):
        comps, time = state_or_geometry.components, state_or_geometry.time
    else:
        comps = (state_or_geometry,)
        time = 0.0 if time is None else time
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for g in comps:
            fh.write(format_geometry(g, time))


def _build(kind: str, n: int, pts: np.ndarray) -> Geometry:
    if kind == "curve":
        return PolyCurve(pts, closed=True)
    if kind == "curve-open":
        return PolyCurve(pts, closed=False)
    if kind in _CLOSURES:
        return AxisymProfile(pts, n=n, closure=_CLOSURES[kind])
    raise ConfigError(f"unknown snapshot kind {kind!r}")


def read_snapshot(path) -> FlowState:
    """Read a snapshot file; several components give a multi-component state."""
    with open(path, encoding="ascii") as fh:
        lines = fh.read().splitlines()
    comps = []
    time = None
    i = 0
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        head = lines[i].split()
        if len(head) != 6 or head[0] != MAGIC:
            raise ConfigError(f"{path}: bad snapshot header {lines[i]!r}")
        if head[1] != VERSION:
            raise ConfigError(f"{path}: unsupported snapshot version {head[1]!r}")
        kind, n, N, t = head[2], int(head[3]), int(head[4]), float(head[5])
        rows = lines[i + 1 : i + 1 + N]
        if len(rows) != N:
            raise ConfigError(f"{path}: expected {N} vertices")
        pts = np.array([[float(v) for v in r.split()] for r in rows], dtype=float)
        comps.append(_build(kind, n, pts))
        time = t if time is None else time
        i += 1 + N
    if not comps:
        raise ConfigError(f"{path}: no geometry found")
    return FlowState(tuple(comps) if len(comps) > 1 else comps[0], time)


# --------------------------------------------------------------------------- CSV


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def write_dense(path, history: FlowHistory) -> None:
    write_csv(path, DENSE_COLUMNS, history.dense_scalars.tolist())


def event_row(e: Event) -> list:
    return [e.time, e.kind, *e.payload.values()]


def write_events(path, history: FlowHistory) -> None:
    """``time,kind,payload`` with payload values expanded in insertion order."""
    with open(path, "w", encoding="ascii", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "kind", "payload"])
        for e in history.events:
            w.writerow([_fmt(v) for v in event_row(e)])


_PAYLOAD_KEYS = {
    "surgery": ("center_x", "radius", "quality", "components_after"),
    "discard": ("component", "topology", "minH"),
    "trigger": ("maxH",),
    "blowup_stop": ("maxH",),
    "extinction": ("component", "area"),
}


def _parse(v: str):
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


def read_events(path) -> list:
    out = []
    with open(path, encoding="ascii", newline="") as fh:
        rows = list(csv.reader(fh))
    for r in rows[1:]:
        t, kind, vals = float(r[0]), r[1], [_parse(v) for v in r[2:]]
        keys = _PAYLOAD_KEYS.get(kind, ())
        if len(keys) == len(vals):
            payload = dict(zip(keys, vals))
        else:
            payload = {f"v{k}": v for k, v in enumerate(vals)}
        out.append(Event(t, kind, payload))
    return out


# --------------------------------------------------------------------------- histories


def write_history(out, history: FlowHistory, frames: bool = False) -> None:
    """Write ``dense_scalars.csv``, ``events.csv`` and ``snapshots/`` under ``out``."""
    out = Path(out)
    snap_dir = out / "snapshots"
    snap_dir.mkdir(parents=True, exist_ok=True)
    write_dense(out / "dense_scalars.csv", history)
    write_events(out / "events.csv", history)
    rows = []
    for k, (s, reach) in enumerate(zip(history.snapshots, history.reach)):
        name = f"snap_{k:06d}.txt"
        write_snapshot(snap_dir / name, s)
        ids = ";".join(str(i) for i in s.ids)
        rows.append([k, s.time, s.step_index, reach, len(s.components), ids, name])
    write_csv(snap_dir / "index.csv", ["index", "time", "step", "reach", "components", "ids", "file"], rows)
    if frames:
        write_frames(out / "frames", history)


def read_history(path) -> FlowHistory:
    """Inverse of :func:`write_history` (frames are ignored)."""
    path = Path(path)
    idx = path / "snapshots" / "index.csv"
    if not idx.exists():
        raise ConfigError(f"{path} is not a history directory (missing snapshots/index.csv)")
    snaps, reach = [], []
    with open(idx, encoding="ascii", newline="") as fh:
        for row in csv.DictReader(fh):
            st = read_snapshot(path / "snapshots" / row["file"])
            ids = tuple(int(v) for v in row["ids"].split(";"))
            snaps.append(FlowState(st.geometry, float(row["time"]), int(row["step"]), ids))
            reach.append(float(row["reach"]))
    dense = None
    dpath = path / "dense_scalars.csv"
    if dpath.exists():
        data = np.loadtxt(dpath, delimiter=",", skiprows=1, ndmin=2)
        dense = data if data.size else None
    events = read_events(path / "events.csv") if (path / "events.csv").exists() else []
    return FlowHistory(snaps, events, dense, reach).seal()


# --------------------------------------------------------------------------- frames


def _viewport(history: FlowHistory):
    pts = []
    for s in history.snapshots[:1]:
        for g in s.components:
            p = np.asarray(g.coords)
            if isinstance(g, AxisymProfile):
                p = np.vstack([p, p * [1, -1]])
            pts.append(p)
    p = np.vstack(pts)
    lo, hi = p.min(axis=0), p.max(axis=0)
    pad = 0.05 * max(hi - lo) + 1e-12
    return lo - pad, hi + pad


def svg_frame(state: FlowState, viewport, size: int = 480) -> str:
    """One SVG image of a state within a fixed viewport."""
    lo, hi = viewport
    span = max(hi - lo)
    scale = size / span

    def path(p, closed):
        xs = (p[:, 0] - lo[0]) * scale
        ys = (hi[1] - p[:, 1]) * scale
        d = " ".join(f"{x:.3f},{y:.3f}" for x, y in zip(xs, ys))
        tag = "polygon" if closed else "polyline"
        return f'<{tag} points="{d}" fill="none" stroke="black" stroke-width="1"/>'

    body = []
    for g in state.components:
        p = np.asarray(g.coords)
        body.append(path(p, g.closed))
        if isinstance(g, AxisymProfile):
            body.append(path(p * [1, -1], g.closed))
    w = int(math.ceil((hi[0] - lo[0]) * scale))
    h = int(math.ceil((hi[1] - lo[1]) * scale))
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">\n'
        f"<title>t = {state.time!r}</title>\n" + "\n".join(body) + "\n</svg>\n"
    )


def write_frames(directory, history: FlowHistory) -> None:
    os.makedirs(directory, exist_ok=True)
    vp = _viewport(history)
    for k, s in enumerate(history.snapshots):
        with open(Path(directory) / f"frame_{k:06d}.svg", "w", encoding="ascii", newline="\n") as fh:
            fh.write(svg_frame(s, vp))


# --------------------------------------------------------------------------- reports


def write_probe_report(path, report) -> None:
    """``r,theta,defect,violation``; rows run from the earliest slice."""
    viol = np.concatenate([[float("nan")], report.violations])
    write_csv(path, ["r", "theta", "defect", "violation"], zip(report.r, report.theta, report.defect, viol))


def write_andrews_report(path, report) -> None:
    N = len(report.H)
    write_csv(
        path,
        ["vertex", "Zstar", "Zlower", "H", "ratio"],
        zip(range(N), report.Z_star, report.Z_lower, report.H, report.ratio),
    )
