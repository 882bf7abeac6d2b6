"""Run configuration: XML loading and writing, validation, canonical digest.

Schema (attributes in brackets are optional)::

    <run seed tick [max_ticks] [near_threshold] [checkpoint_every] [remote_timeout]>
      <world w h>
        <obstacle points="x,y x,y ..."/>   convex polygon
        <rect x y w h/>                    axis-aligned box, stored as a polygon
        <floor rows cols data="v v ..."/>  row 0 is the bottom strip
        <home owner x y w h/>
        <resource x y/>
      </world>
      <scenario name> <param name value/>* </scenario>
      <group name members="a b ..."/>
      <agent name [color] [radius] x y [heading] [csm] [strategy] [memory] [devices]>
        <drive [wheel_base] [max_speed] [max_accel] [align_tol]/>
        <behavior> CSM text </behavior>
        <device type=touch|proximity|floor|odometry|scanner|vision|pose|gripper .../>
        <param name value/>                strategy parameters
        <reflex on left right priority/>
        <threshold source op value event [payload]/>
      </agent>
    </run>

``csm`` is a path relative to the config file, or ``builtin:NAME`` for the
automata bundled in ``agentsim/assets``. An agent without ``<device>`` children
gets the default whisker suite unless ``devices="none"``.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import xml.parsers.expat
from dataclasses import dataclass, field
from importlib import resources as ilr
from pathlib import Path
from typing import Optional
from xml.sax.saxutils import escape, quoteattr

from ..agent import (
    AgentSpec,
    ConfigError,
    ReflexRule,
    StrategySpec,
    ThresholdRule,
    make_policy,
    produced_events,
)
from ..csm import CsmError, Diagnostic, parse_csm, validate_csm
from ..devices import (
    DeviceSuite,
    DriveState,
    OdometryState,
    ProximitySensor,
    TouchSensor,
    VisionSensor,
    whisker_suite,
)
from ..geometry import (
    FloorGrid,
    Home,
    Polygon,
    Pose,
    Resource,
    Vec2,
    WorldMap,
    disc_penetration,
    wrap_angle,
)


class ConfigDiagnostics(ConfigError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


@dataclass(frozen=True)
class ScenarioSpec:
    name: str = "none"
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RunConfig:
    world: WorldMap
    agents: tuple = ()
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)
    seed: int = 0
    tick_duration: float = 0.1
    max_ticks: int = 1000
    near_threshold: float = 1.0
    checkpoint_every: int = 1
    groups: tuple = ()  # (group name, tuple of member names)
    remote_timeout: float = 5.0

    def agent(self, name: str) -> AgentSpec:
        for a in self.agents:
            if a.name == name:
                return a
        raise KeyError(name)


# ---------------------------------------------------------------- xml tree


@dataclass
class _Node:
    tag: str
    attrib: dict
    line: int
    children: list = field(default_factory=list)
    text: str = ""

    def find_all(self, tag):
        return [c for c in self.children if c.tag == tag]

    def find(self, tag):
        for c in self.children:
            if c.tag == tag:
                return c
        return None


def _parse_xml(text: str) -> _Node:
    parser = xml.parsers.expat.ParserCreate()
    stack: list = []
    root: list = []

    def start(tag, attrs):
        node = _Node(tag, dict(attrs), parser.CurrentLineNumber)
        if stack:
            stack[-1].children.append(node)
        else:
            root.append(node)
        stack.append(node)

    def end(tag):
        stack.pop()

    def chars(data):
        if stack:
            stack[-1].text += data

    parser.StartElementHandler = start
    parser.EndElementHandler = end
    parser.CharacterDataHandler = chars
    try:
        parser.Parse(text, True)
    except xml.parsers.expat.ExpatError as exc:
        raise ConfigDiagnostics([Diagnostic("xml", str(exc), exc.lineno, exc.offset)]) from None
    return root[0]


class _Reader:
    def __init__(self, base_dir: Optional[Path]):
        self.base_dir = base_dir
        self.diags: list = []

    def fail(self, code, msg, node=None):
        self.diags.append(Diagnostic(code, msg, node.line if node is not None else 0, 0))

    def num(self, node, key, default=None, positive=False):
        raw = node.attrib.get(key)
        if raw is None:
            if default is None:
                self.fail("schema", f"<{node.tag}> needs attribute {key!r}", node)
                return math.nan
            return default
        try:
            v = float(raw)
        except ValueError:
            self.fail("schema", f"<{node.tag} {key}={raw!r}> is not a number", node)
            return math.nan
        if not math.isfinite(v):
            self.fail("schema", f"<{node.tag} {key}> must be finite", node)
        elif positive and v <= 0:
            self.fail("schema", f"<{node.tag} {key}> must be positive", node)
        return v

    def integer(self, node, key, default=None):
        raw = node.attrib.get(key)
        if raw is None:
            if default is None:
                self.fail("schema", f"<{node.tag}> needs attribute {key!r}", node)
                return 0
            return default
        try:
            return int(raw, 0)
        except ValueError:
            self.fail("schema", f"<{node.tag} {key}={raw!r}> is not an integer", node)
            return 0


def _param_value(raw: str):
    return raw


def _load_behavior(reader: _Reader, node, ref: str) -> str:
    if ref.startswith("builtin:"):
        name = ref.split(":", 1)[1]
        try:
            return ilr.files("agentsim.assets").joinpath(f"{name}.csm").read_text(encoding="utf-8")
        except FileNotFoundError:
            reader.fail("csm", f"no bundled automaton named {name!r}", node)
            return ""
    path = Path(ref)
    if not path.is_absolute() and reader.base_dir is not None:
        path = reader.base_dir / path
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        reader.fail("csm", f"cannot read {path}: {exc.strerror}", node)
        return ""


def _read_world(r: _Reader, node) -> WorldMap:
    w = r.num(node, "w", positive=True)
    h = r.num(node, "h", positive=True)
    obstacles = []
    for child in node.children:
        try:
            if child.tag == "obstacle":
                pts = []
                for pair in child.attrib.get("points", "").split():
                    x, y = pair.split(",")
                    pts.append((float(x), float(y)))
                obstacles.append(Polygon(pts))
            elif child.tag == "rect":
                obstacles.append(Polygon.rect(r.num(child, "x"), r.num(child, "y"),
                                              r.num(child, "w", positive=True),
                                              r.num(child, "h", positive=True)))
        except ValueError as exc:
            r.fail("obstacle", f"bad obstacle: {exc}", child)
    floor = FloorGrid.uniform()
    fnode = node.find("floor")
    if fnode is not None:
        try:
            values = tuple(float(v) for v in fnode.attrib.get("data", "").split())
            floor = FloorGrid(r.integer(fnode, "rows"), r.integer(fnode, "cols"), values)
        except ValueError as exc:
            r.fail("floor", str(exc), fnode)
    homes = tuple(Home(c.attrib.get("owner", ""), r.num(c, "x"), r.num(c, "y"),
                       r.num(c, "w", positive=True), r.num(c, "h", positive=True))
                  for c in node.find_all("home"))
    resources = tuple(Resource(i, Vec2(r.num(c, "x"), r.num(c, "y")))
                      for i, c in enumerate(node.find_all("resource")))
    try:
        return WorldMap(w, h, tuple(obstacles), floor, homes, resources)
    except ValueError as exc:
        r.fail("world", str(exc), node)
        return WorldMap(max(w, 1.0) if math.isfinite(w) else 1.0,
                        max(h, 1.0) if math.isfinite(h) else 1.0)


def _read_devices(r: _Reader, agent_node) -> DeviceSuite:
    nodes = agent_node.find_all("device")
    if not nodes:
        if agent_node.attrib.get("devices", "default") == "none":
            return DeviceSuite()
        return whisker_suite()
    touch, prox = [], []
    kw: dict = {}
    for d in nodes:
        kind = d.attrib.get("type", "")
        name = d.attrib.get("name", kind)
        try:
            if kind == "touch":
                touch.append(TouchSensor(name, r.num(d, "angle"), r.num(d, "half_width", math.pi / 6)))
            elif kind == "proximity":
                prox.append(ProximitySensor(name, r.num(d, "angle"), r.num(d, "range", 1.0)))
            elif kind == "floor":
                kw["floor"] = True
            elif kind == "odometry":
                kw["odometry"] = OdometryState(r.num(d, "wheel_radius", 0.03, positive=True),
                                               r.integer(d, "ticks_per_rev", 100))
            elif kind == "scanner":
                kw["scanner"] = True
            elif kind == "vision":
                kw["vision"] = VisionSensor(name, r.num(d, "range", 3.0))
            elif kind == "pose":
                kw["pose"] = True
            elif kind == "gripper":
                kw["gripper"] = True
            else:
                r.fail("schema", f"unknown device type {kind!r}", d)
        except ValueError as exc:
            r.fail("device", str(exc), d)
    return DeviceSuite(touch=tuple(touch), proximity=tuple(prox), **kw)


def _scalar(raw: str):
    if raw in ("true", "false"):
        return raw == "true"
    try:
        return float(raw)
    except ValueError:
        return raw


def _read_agent(r: _Reader, node) -> Optional[AgentSpec]:
    name = node.attrib.get("name", "")
    if not name:
        r.fail("schema", "<agent> needs a name", node)
        return None
    dnode = node.find("drive")
    drive = DriveState()
    if dnode is not None:
        drive = DriveState(wheel_base=r.num(dnode, "wheel_base", drive.wheel_base, positive=True),
                           max_speed=r.num(dnode, "max_speed", drive.max_speed, positive=True),
                           max_accel=r.num(dnode, "max_accel", drive.max_accel, positive=True),
                           align_tol=r.num(dnode, "align_tol", drive.align_tol, positive=True))
    ref = node.attrib.get("csm", "")
    bnode = node.find("behavior")
    if bnode is not None:
        behavior, ref = bnode.text, ref or "inline"
    elif ref:
        behavior = _load_behavior(r, node, ref)
    else:
        behavior = ""
    params = {p.attrib.get("name", ""): p.attrib.get("value", "") for p in node.find_all("param")}
    reflexes = tuple(ReflexRule(c.attrib.get("on", ""), (r.num(c, "left"), r.num(c, "right")),
                                r.integer(c, "priority", 0))
                     for c in node.find_all("reflex"))
    thresholds = []
    for c in node.find_all("threshold"):
        raw = c.attrib.get("value")
        try:
            thresholds.append(ThresholdRule(c.attrib.get("source", ""), c.attrib.get("op", ""),
                                            None if raw is None else _scalar(raw),
                                            c.attrib.get("event", ""), c.attrib.get("payload")))
        except ConfigError as exc:
            r.fail("threshold", str(exc), c)
    try:
        return AgentSpec(
            name=name,
            color=node.attrib.get("color", "black"),
            body_radius=r.num(node, "radius", 0.2, positive=True),
            initial_pose=Pose(Vec2(r.num(node, "x"), r.num(node, "y")),
                              wrap_angle(r.num(node, "heading", 0.0))),
            devices=_read_devices(r, node),
            drive=drive,
            behavior=behavior,
            behavior_ref=ref,
            strategy=StrategySpec(node.attrib.get("strategy", "null"), params),
            reflexes=reflexes,
            thresholds=tuple(thresholds),
            memory_capacity=r.integer(node, "memory", 32),
        )
    except ConfigError as exc:
        r.fail("agent", str(exc), node)
        return None


def load_config(source, base_dir=None) -> RunConfig:
    """Parse and fully validate a run configuration.

    ``source`` is a path or the XML text itself. Raises
    :class:`ConfigDiagnostics` listing every problem with its line.
    """
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("<")):
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigDiagnostics([Diagnostic("io", f"cannot read {path}: {exc.strerror}")]) from None
        base_dir = base_dir or path.parent
    else:
        text = source
    root = _parse_xml(text)
    r = _Reader(Path(base_dir) if base_dir else None)
    if root.tag != "run":
        r.fail("schema", f"root element must be <run>, found <{root.tag}>", root)
        raise ConfigDiagnostics(r.diags)
    if "seed" not in root.attrib:
        r.fail("schema", "<run> needs an explicit seed", root)
    seed = r.integer(root, "seed", 0)
    wnode = root.find("world")
    if wnode is None:
        r.fail("schema", "<run> needs a <world>", root)
        raise ConfigDiagnostics(r.diags)
    world = _read_world(r, wnode)
    snode = root.find("scenario")
    scenario = ScenarioSpec()
    if snode is not None:
        params = {p.attrib.get("name", ""): p.attrib.get("value", "") for p in snode.find_all("param")}
        scenario = ScenarioSpec(snode.attrib.get("name", "none"), params)
    groups = tuple((g.attrib.get("name", ""), tuple(g.attrib.get("members", "").split()))
                   for g in root.find_all("group"))
    agent_nodes = root.find_all("agent")
    agents = []
    lines = {}
    for n in agent_nodes:
        spec = _read_agent(r, n)
        if spec is not None:
            agents.append(spec)
            lines.setdefault(spec.name, n.line)
    max_ticks = r.integer(root, "max_ticks", 1000)
    config = RunConfig(
        world=world,
        agents=tuple(agents),
        scenario=scenario,
        seed=seed,
        tick_duration=r.num(root, "tick", 0.1, positive=True),
        max_ticks=max_ticks,
        near_threshold=r.num(root, "near_threshold", 1.0),
        checkpoint_every=r.integer(root, "checkpoint_every", 1),
        groups=groups,
        remote_timeout=r.num(root, "remote_timeout", 5.0, positive=True),
    )
    r.diags.extend(validate_config(config, lines))
    if r.diags:
        raise ConfigDiagnostics(r.diags)
    return config


def validate_config(config: RunConfig, lines: Optional[dict] = None) -> list:
    """Semantic checks shared by the XML loader and programmatic builders."""
    lines = lines or {}
    diags = []

    def fail(code, msg, agent=None):
        diags.append(Diagnostic(code, msg, lines.get(agent, 0), 0))

    if config.max_ticks <= 0:
        fail("schema", "max_ticks must be positive")
    if config.checkpoint_every <= 0:
        fail("schema", "checkpoint_every must be positive")
    if config.near_threshold < 0:
        fail("schema", "near_threshold must be non-negative")
    names = set()
    for a in config.agents:
        if a.name in names:
            fail("duplicate-name", f"agent name {a.name!r} used twice", a.name)
        names.add(a.name)
    for gname, members in config.groups:
        if gname in names:
            fail("group", f"group name {gname!r} clashes with an agent name")
        for m in members:
            if m not in names:
                fail("group", f"group {gname!r} lists unknown agent {m!r}")

    world = config.world
    placed = []
    for a in config.agents:
        p = a.initial_pose.position
        if not world.inside(p):
            fail("initial-collision", f"agent {a.name!r} starts outside the world", a.name)
            continue
        hit = disc_penetration(world, p, a.body_radius, None, ())
        if hit is not None:
            fail("initial-collision", f"agent {a.name!r} starts overlapping {hit.other.kind}", a.name)
        for other in placed:
            q = other.initial_pose.position
            if math.hypot(p.x - q.x, p.y - q.y) < a.body_radius + other.body_radius:
                fail("initial-collision",
                     f"agents {other.name!r} and {a.name!r} overlap at start", a.name)
        placed.append(a)

        try:
            policy = make_policy(a.strategy.name, a.strategy.params)
        except (ConfigError, ValueError) as exc:
            fail("strategy", f"agent {a.name!r}: {exc}", a.name)
            continue
        if a.behavior.strip():
            try:
                doc = parse_csm(a.behavior)
            except CsmError as exc:
                for d in exc.diagnostics:
                    fail(d.code, f"{a.behavior_ref or a.name}:{d.line}:{d.col}: {d.message}", a.name)
                continue
            produced = produced_events(a, policy)
            for d in validate_csm(doc, produced):
                fail(d.code, f"{a.behavior_ref or a.name}:{d.line}:{d.col}: {d.message}", a.name)
            scope = set(doc.inputs) | {r.trigger for r in a.reflexes}
            for rule in a.thresholds:
                if rule.event not in scope:
                    fail("undeclared-event",
                         f"agent {a.name!r}: threshold event {rule.event!r} is neither a CSM input "
                         "nor a reflex trigger", a.name)
        channels = a.devices.channel_names([o.name for o in config.agents if o is not a])
        for rule in a.thresholds:
            if rule.source not in channels:
                fail("threshold", f"agent {a.name!r}: no device provides channel {rule.source!r}", a.name)
    return diags


# ---------------------------------------------------------------- canonical form


def _plain(obj):
    if isinstance(obj, Polygon):
        return [list(v) for v in obj.vertices]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple) and hasattr(obj, "_fields"):
        return {k: _plain(v) for k, v in zip(obj._fields, obj)}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in sorted(obj.items())}
    return obj


RUN_CONTROL = ("seed", "max_ticks")


def config_digest(config: RunConfig) -> str:
    """SHA-256 over everything that shapes a run except seed and tick budget."""
    data = _plain(config)
    for key in RUN_CONTROL:
        data.pop(key)
    text = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------- writer


def _f(v: float) -> str:
    return repr(float(v))


def dump_config(config: RunConfig) -> str:
    """Serialize to the XML schema; ``load_config(dump_config(c))`` reproduces ``c``."""
    w = config.world
    out = [
        f'<run seed="{config.seed}" tick="{_f(config.tick_duration)}" max_ticks="{config.max_ticks}" '
        f'near_threshold="{_f(config.near_threshold)}" checkpoint_every="{config.checkpoint_every}" '
        f'remote_timeout="{_f(config.remote_timeout)}">',
        f'  <world w="{_f(w.width)}" h="{_f(w.height)}">',
    ]
    for poly in w.obstacles:
        pts = " ".join(f"{_f(v.x)},{_f(v.y)}" for v in poly.vertices)
        out.append(f'    <obstacle points="{pts}"/>')
    if w.floor != FloorGrid.uniform():
        data = " ".join(_f(v) for v in w.floor.values)
        out.append(f'    <floor rows="{w.floor.rows}" cols="{w.floor.cols}" data="{data}"/>')
    for hm in w.homes:
        out.append(f'    <home owner={quoteattr(hm.owner)} x="{_f(hm.x)}" y="{_f(hm.y)}" '
                   f'w="{_f(hm.w)}" h="{_f(hm.h)}"/>')
    for res in w.resources:
        out.append(f'    <resource x="{_f(res.position.x)}" y="{_f(res.position.y)}"/>')
    out.append("  </world>")
    sc = config.scenario
    out.append(f"  <scenario name={quoteattr(sc.name)}>")
    for k, v in sorted(sc.params.items()):
        out.append(f"    <param name={quoteattr(k)} value={quoteattr(str(v))}/>")
    out.append("  </scenario>")
    for gname, members in config.groups:
        out.append(f'  <group name={quoteattr(gname)} members={quoteattr(" ".join(members))}/>')
    for a in config.agents:
        out.extend(_dump_agent(a))
    out.append("</run>")
    return "\n".join(out) + "\n"


def _dump_agent(a: AgentSpec) -> list:
    p = a.initial_pose
    attrs = (f'name={quoteattr(a.name)} color={quoteattr(a.color)} radius="{_f(a.body_radius)}" '
             f'x="{_f(p.x)}" y="{_f(p.y)}" heading="{_f(p.heading)}" '
             f'strategy={quoteattr(a.strategy.name)} memory="{a.memory_capacity}"')
    builtin = a.behavior_ref.startswith("builtin:")
    if builtin:
        attrs += f" csm={quoteattr(a.behavior_ref)}"
    suite = a.devices
    if suite == DeviceSuite():
        attrs += ' devices="none"'
    out = [f"  <agent {attrs}>"]
    d = a.drive
    out.append(f'    <drive wheel_base="{_f(d.wheel_base)}" max_speed="{_f(d.max_speed)}" '
               f'max_accel="{_f(d.max_accel)}" align_tol="{_f(d.align_tol)}"/>')
    if a.behavior.strip() and not builtin:
        out.append(f"    <behavior>{escape(a.behavior)}</behavior>")
    for t in suite.touch:
        out.append(f'    <device type="touch" name={quoteattr(t.name)} angle="{_f(t.center_angle)}" '
                   f'half_width="{_f(t.half_width)}"/>')
    for s in suite.proximity:
        out.append(f'    <device type="proximity" name={quoteattr(s.name)} angle="{_f(s.mount_angle)}" '
                   f'range="{_f(s.range)}"/>')
    if suite.floor:
        out.append('    <device type="floor"/>')
    if suite.odometry is not None:
        o = suite.odometry
        out.append(f'    <device type="odometry" wheel_radius="{_f(o.wheel_radius)}" '
                   f'ticks_per_rev="{o.ticks_per_rev}"/>')
    if suite.scanner:
        out.append('    <device type="scanner"/>')
    if suite.vision is not None:
        out.append(f'    <device type="vision" name={quoteattr(suite.vision.name)} '
                   f'range="{_f(suite.vision.range)}"/>')
    if suite.pose:
        out.append('    <device type="pose"/>')
    if suite.gripper:
        out.append('    <device type="gripper"/>')
    for k, v in sorted(a.strategy.params.items()):
        out.append(f"    <param name={quoteattr(k)} value={quoteattr(str(v))}/>")
    for rf in a.reflexes:
        out.append(f'    <reflex on={quoteattr(rf.trigger)} left="{_f(rf.command[0])}" '
                   f'right="{_f(rf.command[1])}" priority="{rf.priority}"/>')
    for t in a.thresholds:
        attrs = f'source={quoteattr(t.source)} op={quoteattr(t.op)}'
        if t.value is not None:
            v = t.value
            sv = ("true" if v else "false") if isinstance(v, bool) else (
                _f(v) if isinstance(v, float) else str(v))
            attrs += f" value={quoteattr(sv)}"
        attrs += f" event={quoteattr(t.event)}"
        if t.payload is not None:
            attrs += f" payload={quoteattr(t.payload)}"
        out.append(f"    <threshold {attrs}/>")
    out.append("  </agent>")
    return out


def builtin_behavior(name: str) -> str:
    return ilr.files("agentsim.assets").joinpath(f"{name}.csm").read_text(encoding="utf-8")
