"""Peers, the name/group directory and message routing."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..agent import BROADCAST, AgentOutput, Message

IN_PROCESS = "in_process"


@dataclass
class Peer:
    """Server-side stand-in for one agent, local or remote."""

    id: int
    name: str
    attachment: str = IN_PROCESS  # or "remote:<connection id>" / "replay"
    last_output: AgentOutput = field(default_factory=AgentOutput)
    registered_at: int = 0
    runtime: object = None  # AgentRuntime for in-process peers
    link: object = None  # RemotePeer for remote ones


class Directory:
    """Agent names and groups. Group names never collide with agent names."""

    def __init__(self):
        self.names: dict = {}
        self.groups: dict = {}
        self.warnings: list = []

    def add_agent(self, name: str, agent_id: int) -> None:
        if name in self.names:
            raise ValueError(f"agent name {name!r} already registered")
        if name in self.groups:
            raise ValueError(f"agent name {name!r} clashes with a group")
        if name == BROADCAST:
            raise ValueError("'*' is reserved for broadcast")
        self.names[name] = agent_id

    def members(self, group: str) -> list:
        return sorted(self.groups.get(group, ()))

    def drain_warnings(self) -> list:
        out, self.warnings = self.warnings, []
        return out


GROUP_COMMANDS = ("create", "join", "leave", "dissolve")


def manage_group(directory: Directory, command: str, group: str,
                 agent: Optional[str] = None) -> Directory:
    """Apply one group command. Soft failures land in ``directory.warnings``."""
    if command not in GROUP_COMMANDS:
        raise ValueError(f"unknown group command {command!r}")
    if group in directory.names or group == BROADCAST:
        raise ValueError(f"group name {group!r} clashes with an agent name")
    agent_id = None
    if agent is not None:
        if agent not in directory.names:
            raise KeyError(f"agent {agent!r} is not registered")
        agent_id = directory.names[agent]

    if command == "create":
        directory.groups.setdefault(group, set())
        if agent_id is not None:
            directory.groups[group].add(agent_id)
    elif command == "join":
        directory.groups.setdefault(group, set()).add(agent_id)
    elif command == "leave":
        members = directory.groups.get(group)
        if members is None or agent_id not in members:
            directory.warnings.append(f"leave: {agent!r} is not a member of {group!r}")
        else:
            members.discard(agent_id)
    else:
        if directory.groups.pop(group, None) is None:
            directory.warnings.append(f"dissolve: no group named {group!r}")
    return directory


def route_messages(outbox: Sequence[Message], directory: Directory):
    """Fan messages out to inboxes.

    Returns ``(inboxes, dropped)``: a map agent id -> list of messages ordered
    by (sender id, emission order), and the undeliverable messages.
    """
    inboxes: dict = {}
    dropped = []
    ordered = sorted(enumerate(outbox), key=lambda p: (p[1].sender, p[0]))
    everyone = sorted(directory.names.values())
    for _, msg in ordered:
        dest = msg.dest
        if dest == BROADCAST:
            targets = [i for i in everyone if i != msg.sender]
        elif dest in directory.names:
            targets = [directory.names[dest]]
        elif dest in directory.groups:
            targets = [i for i in directory.members(dest) if i != msg.sender]
        else:
            dropped.append(msg)
            continue
        for i in targets:
            inboxes.setdefault(i, []).append(msg)
    return inboxes, dropped
