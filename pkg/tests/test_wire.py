import socket
import struct
import threading

import pytest
from hypothesis import given
from hypothesis import strategies as st

from agentsim.geometry import Vec2
from agentsim.scenarios.chase import chase_config
from agentsim.server.engine import replay, run_to_text
from agentsim.server.wire import (
    DISCONNECT,
    REGISTER,
    REGISTERED,
    TICK_INPUTS,
    AgentClient,
    ProtocolError,
    accept_agents,
    decode_frame,
    decode_value,
    encode_frame,
    encode_value,
    handshake,
    recv_frame,
    send_frame,
)
from helpers import run_remote

scalars = st.one_of(
    st.none(), st.booleans(), st.integers(-2**63, 2**63 - 1),
    st.floats(allow_nan=False), st.text(max_size=20),
    st.builds(Vec2, st.floats(allow_nan=False), st.floats(allow_nan=False)),
)
values = st.recursive(scalars, lambda inner: st.one_of(
    st.lists(inner, max_size=4), st.dictionaries(st.text(max_size=8), inner, max_size=4)), max_leaves=12)


@given(values)
def test_value_round_trip(v):
    out = decode_value(encode_value(v))
    assert out == v
    assert type(out) is type(v)


@given(st.sampled_from([REGISTER, REGISTERED, TICK_INPUTS, DISCONNECT]), values)
def test_frame_round_trip(kind, body):
    data = encode_frame(kind, body)
    assert struct.unpack_from("<I", data)[0] == len(data) - 4
    assert decode_frame(data) == (kind, body)


def test_fixed_layout():
    assert encode_value(None) == b"\x00"
    assert encode_value(True) == b"\x02"
    assert encode_value(5) == b"\x03" + (5).to_bytes(8, "little")
    assert encode_value("hé") == b"\x05\x03\x00\x00\x00h\xc3\xa9"
    assert encode_value([1.5]) == b"\x06\x01\x00\x00\x00\x04" + struct.pack("<d", 1.5)
    assert encode_frame(DISCONNECT, None) == b"\x02\x00\x00\x00\x05\x00"


@pytest.mark.parametrize("data", [
    b"\x01\x00\x00",
    b"\x05\x00\x00\x00\x05\x00",
    b"\x02\x00\x00\x00\x09\x00",
    b"\x02\x00\x00\x00\x05\x0c",
    b"\x06\x00\x00\x00\x05\x05\x09\x00\x00\x00",
    b"\x03\x00\x00\x00\x05\x00\x00",
])
def test_bad_frames(data):
    with pytest.raises(ProtocolError):
        decode_frame(data)


def test_unencodable():
    with pytest.raises(TypeError):
        encode_value({1: 2})
    with pytest.raises(TypeError):
        encode_value(object())


def test_oversized_frame_rejected():
    a, b = socket.socketpair()
    with a, b:
        a.sendall(struct.pack("<I", (64 << 20) + 1))
        with pytest.raises(ProtocolError):
            recv_frame(b)


def _register(config, name, digest=None, taken=()):
    from agentsim.server.config import config_digest

    a, b = socket.socketpair()
    send_frame(a, REGISTER, {"name": name, "digest": digest or config_digest(config)})
    try:
        peer = handshake(b, config, set(taken))
    except ProtocolError as exc:
        reply = recv_frame(a)
        a.close()
        return None, reply, str(exc)
    reply = recv_frame(a)
    a.close()
    peer.sock.close()
    return peer, reply, None


def test_handshake_accepts_and_refuses():
    c = chase_config(3)
    peer, reply, _ = _register(c, "prey")
    assert reply == (REGISTERED, {"id": 1, "seed": 3, "dt": 0.1})
    assert peer.agent_id == 1
    for args, msg in [(("ghost",), "no agent"), (("prey", "0" * 64), "digest"),
                      (("prey", None, {"prey"}), "already attached")]:
        peer, reply, err = _register(c, *args)
        assert peer is None and msg in err and msg in reply[1]["error"]


@pytest.mark.parametrize("seed", [0, 7])
def test_remote_predator_log_is_identical(seed):
    c = chase_config(seed)
    _, local = run_to_text(c)
    report, remote, clients = run_remote(c, ["predator"])
    assert remote == local
    assert clients[0].ticks == report.ticks


def test_remote_messages_and_groups():
    from importlib import resources

    from agentsim.server.config import load_config

    c = load_config(resources.files("agentsim.assets").joinpath("relay.xml").read_text())
    _, local = run_to_text(c)
    _, remote, _ = run_remote(c, ["caller", "right"])
    assert remote == local


def test_silent_agent_times_out():
    from dataclasses import replace

    c = replace(chase_config(1, max_ticks=3), remote_timeout=0.05)
    listener = socket.create_server(("127.0.0.1", 0))
    port = listener.getsockname()[1]
    cl = AgentClient(c, "prey")
    th = threading.Thread(target=lambda: cl.connect("127.0.0.1", port), daemon=True)
    th.start()
    with listener:
        peers = accept_agents(listener, c, ["prey"], timeout=10)
    th.join(5)
    _, text = run_to_text(c, remote=peers)
    assert text.count('|4.warn|1|{"timeout":"prey"}') == 3
    assert replay(text, c).status == "PASS"
    cl.sock.close()
