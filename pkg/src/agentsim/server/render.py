"""SVG traces drawn from a run log alone (no simulation is re-run).

The header carries the static scene; pose records give the motion and
pick/drop records the resource moves. ``frames`` draws one document every N
ticks with the trails so far; ``overview`` draws the whole run at once.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import NamedTuple
from xml.sax.saxutils import escape, quoteattr

from .runlog import LogContents, read_log

CANVAS = 600.0


class Trace(NamedTuple):
    scene: dict
    ticks: list  # sorted ticks that have pose records
    poses: dict  # tick -> {agent id: (x, y, heading)}
    resources: dict  # tick with a pick or drop -> {res id: (x, y) or None while carried}
    end: dict | None


def load_trace(log) -> Trace:
    """Parse a log (text or LogContents) into the pieces the renderer needs."""
    contents = log if isinstance(log, LogContents) else read_log(log)
    scene = contents.header.get("scene", {})
    res = {r[0]: (r[1], r[2]) for r in scene.get("resources", [])}
    poses: dict = {}
    resources: dict = {}
    end = None
    for r in contents.records:
        if r.kind == "2.pose":
            poses.setdefault(r.tick, {})[int(r.agent)] = tuple(r.payload)
        elif r.kind == "6.pick":
            res[r.payload["res"]] = None
            resources[r.tick] = dict(res)
        elif r.kind == "6.drop":
            res[r.payload["res"]] = (r.payload["x"], r.payload["y"])
            resources[r.tick] = dict(res)
        elif r.kind == "end":
            end = r.payload
    ticks = sorted(poses)
    return Trace(scene, ticks, poses, resources, end)


class _Canvas:
    def __init__(self, scene: dict):
        self.w, self.h = float(scene.get("width", 1.0)), float(scene.get("height", 1.0))
        self.k = CANVAS / max(self.w, self.h)
        self.parts: list = []

    def x(self, v: float) -> str:
        return f"{v * self.k:.2f}"

    def y(self, v: float) -> str:
        # world y grows upward, SVG y downward
        return f"{(self.h - v) * self.k:.2f}"

    def pt(self, x: float, y: float) -> str:
        return f"{self.x(x)},{self.y(y)}"

    def add(self, s: str) -> None:
        self.parts.append(s)

    def document(self) -> str:
        w, h = f"{self.w * self.k:.2f}", f"{self.h * self.k:.2f}"
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
                f'viewBox="0 0 {w} {h}">')
        return "\n".join([head, f'<rect x="0" y="0" width="{w}" height="{h}" fill="white" stroke="black"/>',
                          *self.parts, "</svg>"]) + "\n"


def _scene(c: _Canvas, scene: dict) -> None:
    for owner, x, y, w, h in scene.get("homes", []):
        c.add(f'<rect class="home" x="{c.x(x)}" y="{c.y(y + h)}" width="{w * c.k:.2f}" '
              f'height="{h * c.k:.2f}" fill="#f3ead2" stroke="#a08850"><title>{escape(str(owner))}</title></rect>')
    for verts in scene.get("obstacles", []):
        pts = " ".join(c.pt(x, y) for x, y in verts)
        c.add(f'<polygon class="obstacle" points="{pts}" fill="#777" stroke="#333"/>')


def _resources(c: _Canvas, res: dict) -> None:
    for rid in sorted(res):
        p = res[rid]
        if p is not None:
            c.add(f'<circle class="resource" cx="{c.x(p[0])}" cy="{c.y(p[1])}" r="{max(2.0, 0.08 * c.k):.2f}" '
                  f'fill="#c0392b"/>')


def _trail(c: _Canvas, pts: list, color: str) -> None:
    distinct = []
    for p in pts:
        if not distinct or distinct[-1] != p:
            distinct.append(p)
    if len(distinct) < 2:
        return
    path = " ".join(c.pt(x, y) for x, y in distinct)
    c.add(f'<polyline class="trail" points="{path}" fill="none" stroke={quoteattr(color)} '
          f'stroke-width="1.5" stroke-opacity="0.7"/>')


def _agent(c: _Canvas, pose, info: dict) -> None:
    x, y, h = pose
    r = float(info.get("radius", 0.2))
    color = quoteattr(info.get("color", "black"))
    tip = (x + r * 1.6 * math.cos(h), y + r * 1.6 * math.sin(h))
    c.add(f'<circle class="agent" cx="{c.x(x)}" cy="{c.y(y)}" r="{r * c.k:.2f}" fill={color} '
          f'fill-opacity="0.6" stroke={color}><title>{escape(info.get("name", ""))}</title></circle>')
    c.add(f'<line class="heading" x1="{c.x(x)}" y1="{c.y(y)}" x2="{c.x(tip[0])}" y2="{c.y(tip[1])}" '
          f'stroke={color} stroke-width="2"/>')


def _catch_point(trace: Trace):
    if not trace.end:
        return None
    tick = trace.end.get("metrics", {}).get("catch_tick")
    if tick is None or tick not in trace.poses:
        return None
    pts = list(trace.poses[tick].values())
    return sum(p[0] for p in pts) / len(pts), sum(p[1] for p in pts) / len(pts)


def _render(trace: Trace, upto: int, marks: bool) -> str:
    c = _Canvas(trace.scene)
    _scene(c, trace.scene)
    agents = trace.scene.get("agents", [])
    shown = [t for t in trace.ticks if t <= upto]
    res = {r[0]: (r[1], r[2]) for r in trace.scene.get("resources", [])}
    for t in sorted(trace.resources):
        if t <= upto:
            res = trace.resources[t]
    _resources(c, res)
    for i, info in enumerate(agents):
        _trail(c, [trace.poses[t][i][:2] for t in shown if i in trace.poses[t]], info.get("color", "black"))
    if shown:
        last = trace.poses[shown[-1]]
        for i, info in enumerate(agents):
            if i in last:
                _agent(c, last[i], info)
    if marks:
        p = _catch_point(trace)
        if p is not None:
            s = 0.4
            c.add(f'<path class="catch" d="M{c.pt(p[0] - s, p[1] - s)} L{c.pt(p[0] + s, p[1] + s)} '
                  f'M{c.pt(p[0] - s, p[1] + s)} L{c.pt(p[0] + s, p[1] - s)}" stroke="black" stroke-width="3"/>')
    label = f"tick {shown[-1]}" if shown else "no poses"
    c.add(f'<text x="6" y="16" font-family="monospace" font-size="12">{label}</text>')
    return c.document()


def overview(log) -> str:
    """One document: every trajectory, final poses, and a cross where a catch happened."""
    trace = load_trace(log)
    return _render(trace, trace.ticks[-1] if trace.ticks else -1, True)


def frames(log, every: int) -> list:
    """One document per ``every`` ticks (ticks 0, N, 2N, ...), each with the trails so far."""
    if every < 1:
        raise ValueError("every must be at least 1")
    trace = load_trace(log)
    if not trace.ticks:
        return []
    last = trace.ticks[-1]
    return [_render(trace, t, t == last) for t in range(0, last + 1, every)]


def render_trace(log, out_dir, *, every: int | None = None) -> list:
    """Write SVGs into ``out_dir``: per-N frames when ``every`` is given, else the overview."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        docs = [("overview.svg", overview(log))] if every is None else [
            (f"frame_{i:05d}.svg", d) for i, d in enumerate(frames(log, every))]
        paths = []
        for name, doc in docs:
            p = out / name
            p.write_text(doc, encoding="utf-8")
            paths.append(p)
    except OSError as exc:
        raise OSError(f"cannot write trace into {out}: {exc}") from exc
    return paths
