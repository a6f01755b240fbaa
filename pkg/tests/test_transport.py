import socket
import struct
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import golden_flow
from qtpm.config import Config, load_config, parse_config
from qtpm.tpm import constants as c
from qtpm.tpm.core import Tpm
from qtpm.transport import (
    MAX_FRAME,
    TcpTransport,
    TransportError,
    TransportTimeout,
    client_call,
    start_server,
    stop_server,
)


@pytest.fixture(scope="module")
def echo_server():
    srv = start_server(lambda frame: frame)
    yield srv
    stop_server(srv)


def test_startup_over_tcp_matches_golden(server):
    rec = golden_flow.load_golden()[0]
    assert client_call("127.0.0.1", server.port, bytes.fromhex(rec["command"])).hex() == rec["response"]


def test_golden_transcript_over_tcp():
    a, b = golden_flow.fresh_pair()
    sa, sb = start_server(a.dispatch), start_server(b.dispatch)
    try:
        with TcpTransport("127.0.0.1", sa.port) as ta, TcpTransport("127.0.0.1", sb.port) as tb:
            for rec in golden_flow.load_golden():
                t = ta if rec["tpm"] == "A" else tb
                assert t.call(bytes.fromhex(rec["command"])).hex() == rec["response"], rec["name"]
    finally:
        stop_server(sa)
        stop_server(sb)


def test_oversize_frame_gets_size_error_and_close(server):
    with socket.create_connection(("127.0.0.1", server.port), timeout=5) as s:
        s.sendall(struct.pack(">HII", 0x8001, 5000, c.TPM_CC_STARTUP))
        resp = s.recv(100)
        assert struct.unpack(">HII", resp) == (0x8001, 10, c.TPM_RC_SIZE)
        assert s.recv(100) == b""


def test_undersize_frame_rejected(server):
    with socket.create_connection(("127.0.0.1", server.port), timeout=5) as s:
        s.sendall(struct.pack(">HII", 0x8001, 4, 0))
        assert struct.unpack(">HII", s.recv(100))[2] == c.TPM_RC_SIZE


def test_partial_header_is_dropped_and_server_survives(server):
    with socket.create_connection(("127.0.0.1", server.port), timeout=5) as s:
        s.sendall(b"\x80\x01\x00")
    with TcpTransport("127.0.0.1", server.port) as t:
        resp = t.call(struct.pack(">HII", 0x8001, 12, c.TPM_CC_STARTUP) + b"\x00\x00")
        assert struct.unpack_from(">I", resp, 6)[0] == c.TPM_RC_SUCCESS


def test_sequential_commands_ordered(server):
    startup = struct.pack(">HII", 0x8001, 12, c.TPM_CC_STARTUP) + b"\x00\x00"
    with socket.create_connection(("127.0.0.1", server.port), timeout=5) as s:
        s.sendall(startup + startup)
        data = b""
        while len(data) < 20:
            data += s.recv(100)
    assert struct.unpack(">HII", data[:10])[2] == c.TPM_RC_SUCCESS
    assert struct.unpack(">HII", data[10:])[2] == c.TPM_RC_INITIALIZE


def test_many_clients_share_one_tpm():
    tpm = Tpm()
    srv = start_server(tpm.dispatch)
    results = []
    startup = struct.pack(">HII", 0x8001, 12, c.TPM_CC_STARTUP) + b"\x00\x00"

    def worker():
        results.append(struct.unpack_from(">I", client_call("127.0.0.1", srv.port, startup), 6)[0])

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    stop_server(srv)
    assert sorted(results) == [0] + [c.TPM_RC_INITIALIZE] * 7


@settings(max_examples=50, deadline=None)
@given(st.binary(max_size=MAX_FRAME - 10))
def test_framing_round_trip(echo_server, body):
    frame = struct.pack(">HII", 0x8001, 10 + len(body), 0x144) + body
    assert client_call("127.0.0.1", echo_server.port, frame) == frame


def test_client_refuses_oversize_command(echo_server):
    with pytest.raises(TransportError):
        client_call("127.0.0.1", echo_server.port, bytes(MAX_FRAME + 1))


def test_unreachable_host():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    with pytest.raises(TransportError):
        client_call("127.0.0.1", port, b"x" * 10)


def test_timeout_on_stalled_server():
    listener = socket.socket()
    listener.bind(("127.0.0.1", 0))
    listener.listen()
    try:
        with pytest.raises(TransportTimeout):
            client_call("127.0.0.1", listener.getsockname()[1], struct.pack(">HII", 0x8001, 10, 0x144), timeout=0.3)
    finally:
        listener.close()


def test_server_closing_mid_call():
    srv = start_server(lambda f: f[:5])
    try:
        with pytest.raises(TransportError):
            client_call("127.0.0.1", srv.port, struct.pack(">HII", 0x8001, 10, 0x144), timeout=2)
    finally:
        stop_server(srv)


def test_config_file_env_and_overrides(tmp_path):
    path = tmp_path / "qtpm.conf"
    path.write_text("# comment\nport = 4000\nnv_path = /tmp/nv.bin\nrng_seed = 0a0b\n\ntimeout = 2.5\n")
    cfg = load_config(path, env={})
    assert cfg == Config(port=4000, nv_path="/tmp/nv.bin", rng_seed=b"\x0a\x0b", timeout=2.5)
    cfg = load_config(path, env={"QTPM_PORT": "5000", "QTPM_HOST": "10.0.0.1"})
    assert (cfg.host, cfg.port) == ("10.0.0.1", 5000)
    assert load_config(path, env={"QTPM_PORT": "5000"}, port=6000).port == 6000
    assert load_config(env={}) == Config()
    with pytest.raises(ValueError):
        parse_config("no equals sign")
    with pytest.raises(ValueError):
        load_config(env={}, colour="blue")
