"""The environment server: registration, the tick loop, runs and replay."""
from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

from ..agent import AgentError, AgentOutput, AgentRuntime, AgentSpec, Message, ResourceOp, rng_seed_for
from ..devices import AgentState, apply_inertia, read_devices, read_odometry, resource_visible_to
from ..geometry import (
    CARRIED,
    IN_FIELD,
    STORED,
    contacts_within,
    disc_penetration,
    move_with_collision,
)
from .config import RunConfig, config_digest
from .directory import IN_PROCESS, Directory, Peer, manage_group, route_messages
from .runlog import LogWriter, dumps, format_record, parse_record, read_log, state_checksum


REPLAY = "replay"


class Mode(enum.Enum):
    ONLINE = "online"
    OFFLINE = "offline"


class ModeError(RuntimeError):
    pass


class RegistrationError(ValueError):
    pass


class ReplayRefused(ValueError):
    pass


class ResourceEvent(dict):
    """One resource status change, as logged: kind, agent, res, plus details."""


@dataclass
class RunReport:
    ticks: int
    reason: str  # "max_ticks" | "terminated"
    metrics: dict
    log_path: Optional[str]
    checksum: int
    final_poses: dict = field(default_factory=dict)


def scene_of(config: RunConfig) -> dict:
    """The static picture a renderer needs, embedded in the log header."""
    w = config.world
    return {
        "width": w.width,
        "height": w.height,
        "obstacles": [[list(v) for v in p.vertices] for p in w.obstacles],
        "homes": [[h.owner, h.x, h.y, h.w, h.h] for h in w.homes],
        "resources": [[r.id, r.position.x, r.position.y] for r in w.resources],
        "agents": [{"name": a.name, "color": a.color, "radius": a.body_radius} for a in config.agents],
    }


class EnvServer:
    """World state plus peers. One instance serves one run."""

    def __init__(self, config: RunConfig, log: Optional[LogWriter] = None):
        self.config = config
        self.world = config.world
        self.mode = Mode.ONLINE
        self.tick_count = 0
        self.peers: list = []
        self.agents: list = []
        self.directory = Directory()
        self.resources = list(self.world.resources)
        self.home_index = {h.owner: i for i, h in enumerate(self.world.homes)}
        self.outbox: list = []
        self.readings: dict = {}
        self.contacts: dict = {}
        self.outputs: dict = {}
        self.inboxes: dict = {}
        self.resource_events: list = []
        self.log = log
        self.last_checksum: Optional[int] = None
        self._groups_pending = list(config.groups)
        self.shadow: dict = {}

    # ------------------------------------------------------------ lifecycle

    def set_mode(self, mode: Mode) -> None:
        self.mode = mode

    def _require_online(self, what: str) -> None:
        if self.mode is not Mode.ONLINE:
            raise ModeError(f"{what} needs online mode")

    def register(self, spec: AgentSpec, attachment: str = IN_PROCESS, link=None) -> Peer:
        """Place an agent on the map and create its peer. Ids are dense from 0."""
        self._require_online("register")
        if spec.name in self.directory.names:
            raise RegistrationError(f"agent name {spec.name!r} already registered")
        pos = spec.initial_pose.position
        if not self.world.inside(pos):
            raise RegistrationError(f"agent {spec.name!r} placed outside the world")
        hit = disc_penetration(self.world, pos, spec.body_radius, None, self.agents)
        if hit is not None:
            raise RegistrationError(f"agent {spec.name!r} placed overlapping {hit.other.kind} {hit.other.index}")
        agent_id = len(self.peers)
        self.directory.add_agent(spec.name, agent_id)
        state = AgentState(
            id=agent_id,
            name=spec.name,
            pose=spec.initial_pose,
            radius=spec.body_radius,
            drive=replace(spec.drive, commanded=(0.0, 0.0), actual=(0.0, 0.0)),
            devices=spec.devices,
            color=spec.color,
        )
        peer = Peer(agent_id, spec.name, attachment, registered_at=self.tick_count, link=link)
        if attachment in (IN_PROCESS, REPLAY):
            peer.runtime = AgentRuntime(spec, rng_seed_for(self.config.seed, agent_id),
                                        self.config.tick_duration)
        self.peers.append(peer)
        self.agents.append(state)
        return peer

    def disconnect(self, name: str) -> None:
        """Detach a peer's agent logic; its body stays on the map, stopped."""
        peer = self.peers[self.directory.names[name]]
        if peer.link is not None:
            peer.link.close()
        peer.runtime = None
        peer.link = None
        peer.attachment = "detached"
        a = self.agents[peer.id]
        a.drive = a.drive.command(0.0, 0.0)

    def register_all(self, remote: Optional[dict] = None, attachment: str = IN_PROCESS) -> None:
        remote = remote or {}
        for spec in self.config.agents:
            link = remote.get(spec.name)
            if link is None:
                self.register(spec, attachment)
            else:
                self.register(spec, f"remote:{link.connection_id}", link)
        for gname, members in self._groups_pending:
            for m in members:
                manage_group(self.directory, "join", gname, m)
        self._groups_pending = []

    # ------------------------------------------------------------ queries

    def checksum(self) -> int:
        return state_checksum(self.agents, self.resources, self.home_index)

    def agent(self, name: str) -> AgentState:
        return self.agents[self.directory.names[name]]

    # ------------------------------------------------------------ tick

    def tick(self, recorded: Optional[dict] = None) -> list:
        """Advance one tick; returns this tick's log lines.

        ``recorded`` maps agent id -> AgentOutput and replaces agent stepping (replay).
        """
        self._require_online("tick")
        cfg = self.config
        world = self.world
        dt = cfg.tick_duration
        t = self.tick_count
        agents = self.agents

        # (1) inertia
        for a in agents:
            a.drive = apply_inertia(a.drive, dt)
        # (2) motion, ascending id, each against the others' latest poses
        for a in agents:
            a.pose, _ = move_with_collision(world, a, dt, agents)
            if a.odometry is not None:
                a.odometry = read_odometry(a.odometry, a.drive.actual, dt)
        # (3) readings; touch comes from post-move contact so both parties feel it
        self.readings = {}
        self.contacts = {}
        for a in agents:
            c = contacts_within(world, a.pose.position, a.radius, a.id, agents)
            self.contacts[a.id] = c
            self.readings[a.id] = read_devices(a, world, agents, self.resources, c, cfg.near_threshold)
        # (4) delivery of last tick's messages
        self.inboxes, dropped = route_messages(self.outbox, self.directory)
        self.outbox = []
        # (5) agent step, ascending id; remote peers get their inputs first
        warnings: dict = {}
        for m in dropped:
            warnings.setdefault(m.sender, []).append({"undeliverable": m.dest})
        outputs: dict = {}
        if recorded is None:
            for peer in self.peers:
                if peer.link is not None:
                    peer.link.send_inputs(t, self.readings[peer.id], self.inboxes.get(peer.id, []))
            for peer in self.peers:
                if peer.runtime is not None:
                    out = peer.runtime.step(t, self.readings[peer.id], self.inboxes.get(peer.id, []))
                elif peer.link is not None:
                    out = peer.link.receive_outputs(cfg.remote_timeout)
                    if out is None:
                        warnings.setdefault(peer.id, []).append({"timeout": peer.name})
                        out = AgentOutput(drive=peer.last_output.drive)
                else:
                    out = AgentOutput()
                outputs[peer.id] = out
        else:
            # replay: the log's outputs drive the world; agent logic, when
            # present, runs alongside so its outputs can be checked against them
            self.shadow = {}
            for peer in self.peers:
                outputs[peer.id] = recorded.get(peer.id, AgentOutput())
                if peer.runtime is not None:
                    self.shadow[peer.id] = peer.runtime.step(t, self.readings[peer.id],
                                                             self.inboxes.get(peer.id, []))
        for peer in self.peers:
            out = outputs[peer.id]
            peer.last_output = out
            a = agents[peer.id]
            if out.drive is not None:
                a.drive = a.drive.command(out.drive[0], out.drive[1])
            for m in out.messages:
                self.outbox.append(Message(peer.id, m.dest, m.payload, t))
        self.outputs = outputs
        # (6) resource operations
        self.resource_events = []
        for peer in self.peers:
            for op in outputs[peer.id].resource_ops:
                self._resource_op(agents[peer.id], op)
        self.tick_count = t + 1
        # (7) log
        lines: list = []
        checkpoint = (t + 1) % cfg.checkpoint_every == 0
        if checkpoint:
            self.last_checksum = self.checksum()
        if self.log is not None or recorded is not None:
            lines = self._log_lines(t, outputs, warnings, checkpoint)
            if self.log is not None:
                self.log.write(lines)
        return lines

    def _resource_op(self, a: AgentState, op: ResourceOp) -> None:
        if op.kind == "pick":
            rid = op.resource
            if a.holding is not None or rid is None or not 0 <= rid < len(self.resources):
                return
            res = self.resources[rid]
            if res.status == CARRIED or not resource_visible_to(res, a.name):
                return
            p = a.pose.position
            if (res.position - p).norm() > a.pick_radius:
                return
            origin = "field" if res.status == IN_FIELD else f"home:{res.holder}"
            theft = res.status == STORED and res.holder != a.name
            self.resources[rid] = res._replace(status=CARRIED, holder=a.id)
            a.holding = rid
            self.resource_events.append(ResourceEvent(kind="pick", agent=a.id, res=rid,
                                                      origin=origin, theft=theft,
                                                      victim=res.holder if theft else None))
        elif op.kind == "drop":
            rid = a.holding
            if rid is None:
                return
            p = a.pose.position
            home = self.world.home_at(p)
            if home is not None:
                new = self.resources[rid]._replace(position=p, status=STORED, holder=home.owner)
                dest = f"home:{home.owner}"
            else:
                new = self.resources[rid]._replace(position=p, status=IN_FIELD, holder=None)
                dest = "field"
            self.resources[rid] = new
            a.holding = None
            self.resource_events.append(ResourceEvent(kind="drop", agent=a.id, res=rid, dest=dest,
                                                      x=p.x, y=p.y))

    def _log_lines(self, t: int, outputs: dict, warnings: dict, checkpoint: bool) -> list:
        # phase-major: the kind prefix of every record is its tick phase
        lines = []
        for a in self.agents:
            (x, y), h = a.pose
            lines.append(format_record(t, "2.pose", a.id, [x, y, h]))
        for a in self.agents:
            for w in warnings.get(a.id, ()):
                lines.append(format_record(t, "4.warn", a.id, w))
        for a in self.agents:
            lines.extend(output_lines(t, a.id, outputs[a.id]))
        for ev in self.resource_events:
            body = {k: v for k, v in ev.items() if k not in ("kind", "agent")}
            lines.append(format_record(t, "6." + ev["kind"], ev["agent"], body))
        if checkpoint:
            lines.append(format_record(t, "7.chk", "*", f"{self.last_checksum:016x}"))
        return lines


def output_lines(t: int, i: int, out: AgentOutput) -> list:
    """The phase-5 records of one agent's output."""
    lines = []
    names = [n for n in out.events if n != "TICK"]
    if names:
        lines.append(format_record(t, "5.event", i, names))
    if out.drive is not None:
        lines.append(format_record(t, "5.cmd", i, [float(out.drive[0]), float(out.drive[1])]))
    for m in out.messages:
        lines.append(format_record(t, "5.send", i, {"to": m.dest, "payload": m.payload}))
    for op in out.resource_ops:
        lines.append(format_record(t, "5.op", i, {"op": op.kind, "res": op.resource}))
    return lines


# ---------------------------------------------------------------- runs


def _header(config: RunConfig) -> dict:
    return {
        "digest": config_digest(config),
        "seed": config.seed,
        "max_ticks": config.max_ticks,
        "checkpoint_every": config.checkpoint_every,
        "tick": config.tick_duration,
        "scene": scene_of(config),
    }


def run(config: RunConfig, log_path=None, *, remote: Optional[dict] = None, monitor=None,
        on_tick: Optional[Callable] = None) -> RunReport:
    """Execute a run until ``max_ticks`` or the scenario's termination predicate.

    ``log_path`` may be a path, an open text stream, or None for no log.
    ``remote`` maps agent names to connected remote links. ``on_tick`` is
    called with the server after every tick (for invariant checks).
    """
    from ..scenarios import monitor_for

    if monitor is None:
        monitor = monitor_for(config)
    stream = None
    owned = False
    if log_path is not None:
        if isinstance(log_path, (str, Path)):
            try:
                stream = open(log_path, "w", encoding="utf-8", newline="\n")
            except OSError as exc:
                raise OSError(f"cannot open log {log_path}: {exc.strerror}") from exc
            owned = True
        else:
            stream = log_path
    writer = LogWriter(stream, _header(config)) if stream is not None else None
    server = EnvServer(config, writer)
    try:
        server.register_all(remote)
        monitor.start(server)
        reason = "max_ticks"
        while server.tick_count < config.max_ticks:
            server.tick()
            if on_tick is not None:
                on_tick(server)
            if monitor.after_tick(server):
                reason = "terminated"
                break
        metrics = monitor.metrics(server)
        chk = server.checksum()
        if writer is not None:
            last = server.tick_count - 1
            if server.tick_count % config.checkpoint_every != 0:
                writer.write([format_record(last, "7.chk", "*", f"{chk:016x}")])
            writer.write([format_record(last, "end", "*", {"reason": reason, "ticks": server.tick_count,
                                                           "metrics": metrics})])
            writer.flush()
    finally:
        for peer in server.peers:
            if peer.link is not None:
                peer.link.close()
        if owned:
            stream.close()
    return RunReport(
        ticks=server.tick_count,
        reason=reason,
        metrics=metrics,
        log_path=str(log_path) if owned else None,
        checksum=chk,
        final_poses={a.name: (a.pose.x, a.pose.y, a.pose.heading) for a in server.agents},
    )


def run_to_text(config: RunConfig, **kw) -> tuple:
    """Run with an in-memory log; returns (report, log text)."""
    buf = io.StringIO()
    report = run(config, buf, **kw)
    return report, buf.getvalue()


# ---------------------------------------------------------------- replay


@dataclass
class Verdict:
    status: str  # PASS | FAIL | PARTIAL
    last_verified: int  # last tick whose records all matched, -1 if none
    first_divergence: Optional[int] = None
    detail: str = ""

    def __str__(self):
        if self.status == "FAIL":
            return f"FAIL: first divergence at tick {self.first_divergence} ({self.detail})"
        if self.status == "PARTIAL":
            return f"PARTIAL: log ends early, verified through tick {self.last_verified}"
        return f"PASS: verified through tick {self.last_verified}"


def _recorded_outputs(records) -> dict:
    outs: dict = {}
    for r in records:
        if r.agent == "*":
            continue
        i = int(r.agent)
        out = outs.setdefault(i, AgentOutput())
        if r.kind == "5.cmd":
            vl, vr = r.payload
            out.drive = (float(vl), float(vr))
        elif r.kind == "5.send":
            out.messages.append(Message(i, r.payload["to"], r.payload["payload"], r.tick))
        elif r.kind == "5.op":
            out.resource_ops.append(ResourceOp(r.payload["op"], r.payload["res"]))
    return outs


_VERIFIED_KINDS = ("2.pose", "6.pick", "6.drop", "7.chk")


def _verified(records) -> set:
    return {(r.kind, r.agent, dumps(r.payload)) for r in records if r.kind in _VERIFIED_KINDS}


def replay(log_text: str, config: RunConfig) -> Verdict:
    """Re-simulate a log, feeding its recorded commands to the world.

    Each agent's logic runs alongside on the recomputed readings and must
    reproduce the logged commands, sends and resource operations; recomputed
    poses, resource changes and checkpoint checksums must match the log exactly. Raises :class:`ReplayRefused` when the log belongs to another
    configuration.
    """
    contents = read_log(log_text)
    header = contents.header
    config = replace(config, seed=header["seed"], max_ticks=header["max_ticks"])
    if header.get("digest") != config_digest(config):
        raise ReplayRefused("log digest does not match the configuration")

    server = EnvServer(config)
    server.register_all(attachment=REPLAY)

    by_tick: dict = {}
    for r in contents.records:
        by_tick.setdefault(r.tick, []).append(r)
    ticks = sorted(by_tick)
    ended = any(r.kind == "end" for r in contents.records)

    bad_tick = None
    if contents.bad_line is not None:
        line = log_text.split("\n")[1 + contents.bad_line]
        try:
            bad_tick = int(line.split("|", 1)[0])
        except ValueError:
            bad_tick = ticks[-1] if ticks else 0
    elif not ended and ticks:
        # the final tick of a cut log may be incomplete; don't judge it
        ticks = ticks[:-1]

    last_ok = -1
    every = config.checkpoint_every
    for t in ticks:
        if bad_tick is not None and t >= bad_tick:
            break
        if t != server.tick_count:
            return Verdict("FAIL", last_ok, t, f"tick {t} out of sequence")
        records = by_tick[t]
        for r in records:
            if r.kind == "4.warn" and "timeout" in r.payload:
                # what a silent remote agent did is unknowable; stop checking its logic
                server.peers[int(r.agent)].runtime = None
        try:
            lines = server.tick(_recorded_outputs(records))
        except AgentError as exc:
            return Verdict("FAIL", last_ok, t, f"agent logic failed on the logged inputs: {exc}")
        expected = [(r.kind, r.agent, dumps(r.payload))
                    for i in sorted(server.shadow) for r in map(parse_record, output_lines(t, i, server.shadow[i]))]
        logged = [(r.kind, r.agent, dumps(r.payload)) for r in records
                  if r.kind.startswith("5.") and r.agent != "*" and int(r.agent) in server.shadow]
        if expected != logged:
            diff = next((a for a, b in zip(expected, logged) if a != b), (expected or logged)[-1])
            return Verdict("FAIL", last_ok, t, f"{diff[0]} record for agent {diff[1]} differs from its logic")
        produced = _verified(parse_record(x) for x in lines)
        recorded = _verified(records)
        if ended and t == ticks[-1] and server.tick_count % every != 0:
            # a run closes with an off-schedule checksum
            produced.add(("7.chk", "*", dumps(f"{server.checksum():016x}")))
        if produced != recorded:
            kind, agent, _ = sorted(produced ^ recorded)[0]
            return Verdict("FAIL", last_ok, t, f"{kind} record for agent {agent} differs")
        last_ok = t
    if bad_tick is not None:
        return Verdict("FAIL", last_ok, bad_tick, "unreadable record")
    if not ended:
        return Verdict("PARTIAL", last_ok)
    return Verdict("PASS", last_ok)
