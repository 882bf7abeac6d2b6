"""Wire protocol between the server and agents running in other processes.

A frame is a little-endian u32 length, a u8 message kind and one tagged
value (the body). Floats travel as IEEE doubles, so a remote agent sees
exactly the readings an in-process one would.

Session: the agent sends REGISTER {name, digest}; the server answers
REGISTERED {id, seed, dt} or {error}. Then, every tick, TICK_INPUTS
{tick, readings, inbox} goes out and TICK_OUTPUTS {tick, drive, messages,
ops, events} comes back. DISCONNECT from either side ends the session.
"""
from __future__ import annotations

import logging
import socket
import struct
import time
from typing import Optional

from ..agent import AgentOutput, AgentRuntime, Message, ResourceOp, rng_seed_for
from ..geometry import Vec2
from .config import RunConfig, config_digest

log = logging.getLogger(__name__)

REGISTER, REGISTERED, TICK_INPUTS, TICK_OUTPUTS, DISCONNECT = 1, 2, 3, 4, 5
KINDS = {REGISTER, REGISTERED, TICK_INPUTS, TICK_OUTPUTS, DISCONNECT}

T_NONE, T_FALSE, T_TRUE, T_INT, T_FLOAT, T_STR, T_LIST, T_MAP, T_VEC2 = range(9)
MAX_FRAME = 64 << 20

_U32 = struct.Struct("<I")
_I64 = struct.Struct("<q")
_F64 = struct.Struct("<d")
_VEC = struct.Struct("<dd")


class ProtocolError(RuntimeError):
    pass


# ---------------------------------------------------------------- values


def _encode(v, out: bytearray) -> None:
    if v is None:
        out.append(T_NONE)
    elif v is True:
        out.append(T_TRUE)
    elif v is False:
        out.append(T_FALSE)
    elif isinstance(v, int):
        out.append(T_INT)
        out += _I64.pack(v)
    elif isinstance(v, float):
        out.append(T_FLOAT)
        out += _F64.pack(v)
    elif isinstance(v, str):
        b = v.encode("utf-8")
        out.append(T_STR)
        out += _U32.pack(len(b))
        out += b
    elif isinstance(v, Vec2):
        out.append(T_VEC2)
        out += _VEC.pack(v.x, v.y)
    elif isinstance(v, (list, tuple)):
        out.append(T_LIST)
        out += _U32.pack(len(v))
        for item in v:
            _encode(item, out)
    elif isinstance(v, dict):
        out.append(T_MAP)
        out += _U32.pack(len(v))
        for k, item in v.items():
            if not isinstance(k, str):
                raise TypeError(f"map keys must be strings, got {type(k).__name__}")
            _encode(k, out)
            _encode(item, out)
    else:
        raise TypeError(f"cannot encode {type(v).__name__}")


def encode_value(v) -> bytes:
    out = bytearray()
    _encode(v, out)
    return bytes(out)


def _decode(buf: bytes, i: int):
    try:
        tag = buf[i]
    except IndexError:
        raise ProtocolError("truncated value") from None
    i += 1
    if tag == T_NONE:
        return None, i
    if tag == T_TRUE:
        return True, i
    if tag == T_FALSE:
        return False, i
    try:
        if tag == T_INT:
            return _I64.unpack_from(buf, i)[0], i + 8
        if tag == T_FLOAT:
            return _F64.unpack_from(buf, i)[0], i + 8
        if tag == T_VEC2:
            x, y = _VEC.unpack_from(buf, i)
            return Vec2(x, y), i + 16
        (n,) = _U32.unpack_from(buf, i)
    except struct.error:
        raise ProtocolError("truncated value") from None
    i += 4
    if tag == T_STR:
        if i + n > len(buf):
            raise ProtocolError("truncated string")
        return buf[i:i + n].decode("utf-8"), i + n
    if tag == T_LIST:
        items = []
        for _ in range(n):
            item, i = _decode(buf, i)
            items.append(item)
        return items, i
    if tag == T_MAP:
        d = {}
        for _ in range(n):
            k, i = _decode(buf, i)
            if not isinstance(k, str):
                raise ProtocolError("map key is not a string")
            d[k], i = _decode(buf, i)
        return d, i
    raise ProtocolError(f"unknown value tag {tag}")


def decode_value(buf: bytes):
    v, i = _decode(buf, 0)
    if i != len(buf):
        raise ProtocolError(f"{len(buf) - i} trailing bytes after value")
    return v


def tuplify(v):
    """Lists back to tuples, recursively; readings hold tuples in process."""
    if isinstance(v, list):
        return tuple(tuplify(x) for x in v)
    if isinstance(v, dict):
        return {k: tuplify(x) for k, x in v.items()}
    return v


# ---------------------------------------------------------------- frames


def encode_frame(kind: int, body) -> bytes:
    payload = encode_value(body)
    return _U32.pack(len(payload) + 1) + bytes((kind,)) + payload


def decode_frame(data: bytes) -> tuple:
    """(kind, body) from one complete frame."""
    if len(data) < 5:
        raise ProtocolError("frame shorter than its header")
    (n,) = _U32.unpack_from(data, 0)
    if n != len(data) - 4:
        raise ProtocolError("frame length does not match")
    kind = data[4]
    if kind not in KINDS:
        raise ProtocolError(f"unknown message kind {kind}")
    return kind, decode_value(data[5:])


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    while n:
        chunk = sock.recv(n)
        if not chunk:
            raise ConnectionError("peer closed the connection")
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def send_frame(sock: socket.socket, kind: int, body) -> None:
    sock.sendall(encode_frame(kind, body))


def recv_frame(sock: socket.socket) -> tuple:
    head = _recv_exact(sock, 4)
    (n,) = _U32.unpack(head)
    if n < 1 or n > MAX_FRAME:
        raise ProtocolError(f"bad frame length {n}")
    return decode_frame(head + _recv_exact(sock, n))


# ---------------------------------------------------------------- outputs


def output_to_wire(tick: int, out: AgentOutput) -> dict:
    return {
        "tick": tick,
        "drive": None if out.drive is None else list(out.drive),
        "messages": [[m.dest, m.payload] for m in out.messages],
        "ops": [[op.kind, op.resource] for op in out.resource_ops],
        "events": list(out.events),
    }


def output_from_wire(body: dict, sender: int) -> AgentOutput:
    drive = body.get("drive")
    return AgentOutput(
        drive=None if drive is None else (drive[0], drive[1]),
        messages=[Message(sender, dest, tuplify(payload), body["tick"]) for dest, payload in body["messages"]],
        resource_ops=[ResourceOp(kind, res) for kind, res in body["ops"]],
        events=list(body["events"]),
    )


# ---------------------------------------------------------------- server side


class RemotePeer:
    """Server-side end of one agent connection; the engine's link interface."""

    def __init__(self, sock: socket.socket, agent_id: int, name: str, connection_id: str):
        self.sock = sock
        self.agent_id = agent_id
        self.name = name
        self.connection_id = connection_id
        self.tick: Optional[int] = None
        self.closed = False

    def send_inputs(self, tick: int, readings: dict, inbox) -> None:
        self.tick = tick
        body = {"tick": tick, "readings": readings,
                "inbox": [[m.sender, m.dest, m.payload, m.tick] for m in inbox]}
        send_frame(self.sock, TICK_INPUTS, body)

    def receive_outputs(self, timeout: float) -> Optional[AgentOutput]:
        """This tick's outputs, or None on timeout or disconnect.

        Replies for earlier ticks (late after a timeout) are skipped.
        """
        if self.closed:
            return None
        deadline = time.monotonic() + timeout
        try:
            while True:
                left = deadline - time.monotonic()
                if left <= 0:
                    return None
                self.sock.settimeout(left)
                kind, body = recv_frame(self.sock)
                if kind == DISCONNECT:
                    self.closed = True
                    return None
                if kind != TICK_OUTPUTS:
                    raise ProtocolError(f"expected outputs, got message kind {kind}")
                if body.get("tick") == self.tick:
                    return output_from_wire(body, self.agent_id)
                log.warning("%s: discarding outputs for tick %s", self.name, body.get("tick"))
        except socket.timeout:
            return None
        except ConnectionError:
            self.closed = True
            return None
        finally:
            if not self.closed:
                self.sock.settimeout(None)

    def close(self) -> None:
        if not self.closed:
            try:
                send_frame(self.sock, DISCONNECT, None)
            except OSError:
                pass
            self.closed = True
        self.sock.close()


def handshake(sock: socket.socket, config: RunConfig, taken: set, timeout: float = 10.0) -> RemotePeer:
    """Answer one REGISTER. Raises ProtocolError (after telling the agent) on refusal."""
    sock.settimeout(timeout)
    kind, body = recv_frame(sock)
    sock.settimeout(None)
    if kind != REGISTER or not isinstance(body, dict):
        raise ProtocolError("expected REGISTER")
    name = body.get("name")
    names = [a.name for a in config.agents]
    if name not in names:
        error = f"no agent named {name!r} in this run"
    elif name in taken:
        error = f"agent {name!r} already attached"
    elif body.get("digest") != config_digest(config):
        error = "configuration digest differs from the server's"
    else:
        error = None
    if error is not None:
        send_frame(sock, REGISTERED, {"error": error})
        sock.close()
        raise ProtocolError(error)
    agent_id = names.index(name)
    send_frame(sock, REGISTERED, {"id": agent_id, "seed": config.seed, "dt": config.tick_duration})
    addr = sock.getpeername()
    where = f"{addr[0]}:{addr[1]}" if isinstance(addr, tuple) else "local"
    return RemotePeer(sock, agent_id, name, f"{name}@{where}")


def accept_agents(listener: socket.socket, config: RunConfig, names, timeout: float = 60.0) -> dict:
    """Block until every agent in ``names`` has connected and registered."""
    wanted = set(names)
    peers: dict = {}
    deadline = time.monotonic() + timeout
    while wanted - peers.keys():
        left = deadline - time.monotonic()
        if left <= 0:
            missing = ", ".join(sorted(wanted - peers.keys()))
            raise TimeoutError(f"agents did not connect: {missing}")
        listener.settimeout(left)
        try:
            conn, _ = listener.accept()
        except socket.timeout:
            continue
        if conn.family in (socket.AF_INET, socket.AF_INET6):
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        try:
            peer = handshake(conn, config, set(peers))
        except (ProtocolError, ConnectionError, socket.timeout) as exc:
            log.warning("refused connection: %s", exc)
            continue
        if peer.name not in wanted:
            log.warning("refused %s: not listed as remote", peer.name)
            peer.close()
            continue
        peers[peer.name] = peer
    return peers


# ---------------------------------------------------------------- agent side


class AgentClient:
    """Runs one agent's logic in this process against a remote server."""

    def __init__(self, config: RunConfig, name: str):
        self.config = config
        self.spec = config.agent(name)
        self.sock: Optional[socket.socket] = None
        self.runtime: Optional[AgentRuntime] = None
        self.agent_id: Optional[int] = None
        self.ticks = 0

    def connect(self, host: str = "127.0.0.1", port: int = 0, sock: Optional[socket.socket] = None) -> None:
        if sock is None:
            sock = socket.create_connection((host, port))
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.sock = sock
        send_frame(sock, REGISTER, {"name": self.spec.name, "digest": config_digest(self.config)})
        kind, body = recv_frame(sock)
        if kind != REGISTERED:
            raise ProtocolError("expected REGISTERED")
        if "error" in body:
            sock.close()
            raise ProtocolError(f"registration refused: {body['error']}")
        self.agent_id = body["id"]
        self.runtime = AgentRuntime(self.spec, rng_seed_for(body["seed"], self.agent_id), body["dt"])

    def serve(self) -> int:
        """Answer ticks until the server disconnects. Returns the ticks served."""
        sock = self.sock
        try:
            while True:
                try:
                    kind, body = recv_frame(sock)
                except ConnectionError:
                    break
                if kind == DISCONNECT:
                    break
                if kind != TICK_INPUTS:
                    raise ProtocolError(f"unexpected message kind {kind}")
                tick = body["tick"]
                readings = tuplify(body["readings"])
                inbox = [Message(s, d, tuplify(p), t) for s, d, p, t in body["inbox"]]
                out = self.runtime.step(tick, readings, inbox)
                send_frame(sock, TICK_OUTPUTS, output_to_wire(tick, out))
                self.ticks += 1
        finally:
            sock.close()
        return self.ticks

    def disconnect(self) -> None:
        if self.sock is not None:
            try:
                send_frame(self.sock, DISCONNECT, None)
            finally:
                self.sock.close()
