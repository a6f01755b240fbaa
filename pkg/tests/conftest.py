import pytest

from qtpm import keccak
from qtpm.tpm.core import Tpm
from qtpm.transport import TcpTransport, start_server, stop_server
from qtpm.tss import TssClient

PAPER_STRING = "My super secret. Please don’t share.\n".encode("utf-8")
PAPER_DIGEST = keccak.sha3_256(PAPER_STRING)
TEST_SEED = bytes.fromhex("00112233445566778899aabbccddeeff")


@pytest.fixture
def tpm():
    t = Tpm(rng_seed=TEST_SEED)
    client = TssClient(t.dispatch)
    client.startup()
    return t


@pytest.fixture
def client(tpm):
    return TssClient(tpm.dispatch)


@pytest.fixture
def server():
    t = Tpm(rng_seed=TEST_SEED)
    srv = start_server(t.dispatch)
    yield srv
    stop_server(srv)


@pytest.fixture
def tcp_client(server):
    transport = TcpTransport("127.0.0.1", server.port, timeout=10)
    yield TssClient(transport)
    transport.close()


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
