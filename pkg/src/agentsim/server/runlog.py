"""Run log format and state checksums.

A log is UTF-8 text. The first line is the header::

    #agentsim-log 1 {"digest": ..., "seed": ..., "max_ticks": ..., "scene": {...}}

Every following line is one record ``tick|kind|agent|payload``. ``agent`` is
a registration id or ``*`` for run-wide records. ``payload`` is compact JSON
and is everything after the third ``|``; JSON escapes newlines and may itself
contain ``|``, so a reader splits at most three times. Records appear in
(tick, agent id) order; within one agent the kind prefix is the tick phase
that produced it (``2.pose``, ``4.undeliverable``, ``5.cmd`` ...), and
run-wide records (``7.chk`` checkpoints, ``end``) close their tick.
"""
from __future__ import annotations

import json
import math
import struct
from typing import IO, NamedTuple, Optional, Sequence

from ..geometry import CARRIED, IN_FIELD, STORED, Vec2

FORMAT_VERSION = 1
MAGIC = "#agentsim-log"

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK = 0xFFFFFFFFFFFFFFFF
_FIXED = float(1 << 32)


def fnv1a64(data: bytes, h: int = FNV_OFFSET) -> int:
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & _MASK
    return h


def _fixed(v: float) -> bytes:
    if not math.isfinite(v):
        raise ValueError(f"cannot checksum non-finite value {v!r}")
    return struct.pack("<q", int(round(v * _FIXED)))


_STATUS_CODE = {IN_FIELD: 0, CARRIED: 1, STORED: 2}


def state_checksum(agents: Sequence, resources: Sequence, home_index: Optional[dict] = None) -> int:
    """FNV-1a 64 over a fixed-point (x 2^32, int64 LE) encoding of the world state.

    Covers every agent's pose and wheel speeds and every resource's status,
    holder and position. Independent of platform float formatting.
    """
    home_index = home_index or {}
    buf = bytearray()
    for a in agents:
        (x, y), h = a.pose
        for v in (x, y, h, *a.drive.commanded, *a.drive.actual):
            buf += _fixed(v)
    for r in resources:
        buf += struct.pack("<q", _STATUS_CODE[r.status])
        if r.status == CARRIED:
            holder = r.holder
        elif r.status == STORED:
            holder = home_index.get(r.holder, -2)
        else:
            holder = -1
        buf += struct.pack("<q", holder)
        buf += _fixed(r.position.x) + _fixed(r.position.y)
    return fnv1a64(bytes(buf))


# ---------------------------------------------------------------- records


class Record(NamedTuple):
    tick: int
    kind: str
    agent: str  # decimal id or "*"
    payload: object


def _jsonable(v):
    if isinstance(v, Vec2):
        return [v.x, v.y]
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    if isinstance(v, list):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def dumps(payload) -> str:
    return json.dumps(_jsonable(payload), separators=(",", ":"), sort_keys=True, allow_nan=False)


def format_record(tick: int, kind: str, agent, payload) -> str:
    return f"{tick}|{kind}|{agent}|{dumps(payload)}"


def parse_record(line: str) -> Record:
    parts = line.split("|", 3)
    if len(parts) != 4:
        raise ValueError(f"malformed log record: {line!r}")
    tick, kind, agent, payload = parts
    return Record(int(tick), kind, agent, json.loads(payload))


class LogWriter:
    """Append-only writer; every tick's records are flushed together."""

    def __init__(self, stream: IO[str], header: dict):
        self.stream = stream
        stream.write(f"{MAGIC} {FORMAT_VERSION} {dumps(header)}\n")

    def write(self, lines: Sequence[str]) -> None:
        if lines:
            self.stream.write("\n".join(lines) + "\n")

    def flush(self) -> None:
        self.stream.flush()


class LogContents(NamedTuple):
    header: dict
    records: list
    truncated: bool  # last line incomplete or unparsable
    bad_line: Optional[int]  # index into records where parsing stopped


def read_log(text: str) -> LogContents:
    lines = text.split("\n")
    first = lines[0]
    if not first.startswith(MAGIC + " "):
        raise ValueError("not a run log (missing header)")
    _, version, header = first.split(" ", 2)
    if int(version) != FORMAT_VERSION:
        raise ValueError(f"unsupported log format version {version}")
    header = json.loads(header)
    body = lines[1:]
    # a complete log ends with a newline, leaving an empty final element
    truncated = not body or body[-1] != ""
    if body and body[-1] == "":
        body = body[:-1]
    records = []
    bad = None
    for i, line in enumerate(body):
        try:
            records.append(parse_record(line))
        except (ValueError, json.JSONDecodeError):
            if not (truncated and i == len(body) - 1):
                bad = i
            break
    else:
        if truncated and body:
            # the last line was cut mid-write even if it happens to parse
            records.pop()
    return LogContents(header, records, truncated, bad)
