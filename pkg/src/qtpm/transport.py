"""TCP stand-in for the TCTI bus.

A frame is the raw TPM command or response; its length is the size field
in header bytes 2..5, so no extra envelope is needed.  The server accepts
many connections but hands frames to the dispatcher one at a time.
"""

from __future__ import annotations

import logging
import socket
import socketserver
import struct
import threading
from typing import Callable

from .config import DEFAULT_PORT, DEFAULT_TIMEOUT
from .tpm.constants import HEADER_SIZE, TPM_RC_SIZE
from .tpm.marshal import build_response

log = logging.getLogger(__name__)

MAX_FRAME = 4096

Dispatcher = Callable[[bytes], bytes]


class TransportError(Exception):
    """Connection-level failure, distinct from any TPM response code."""


class TransportTimeout(TransportError):
    pass


class FrameError(TransportError):
    """The peer announced a frame size outside [10, MAX_FRAME]."""

    def __init__(self, size: int):
        super().__init__(f"frame size {size} outside [{HEADER_SIZE}, {MAX_FRAME}]")
        self.size = size


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    """Read exactly n bytes; None if the peer closed first."""
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return bytes(buf)


def read_frame(sock: socket.socket) -> bytes | None:
    """One frame, or None on a clean or partial-header close."""
    header = _recv_exact(sock, HEADER_SIZE)
    if header is None:
        return None
    size = struct.unpack_from(">I", header, 2)[0]
    if size < HEADER_SIZE or size > MAX_FRAME:
        raise FrameError(size)
    body = _recv_exact(sock, size - HEADER_SIZE)
    if body is None:
        return None
    return header + body


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        sock = self.request
        server = self.server
        while True:
            try:
                frame = read_frame(sock)
            except FrameError as e:
                log.info("dropping connection: %s", e)
                sock.sendall(build_response(TPM_RC_SIZE))
                return
            except OSError:
                return
            if frame is None:
                return
            with server.lock:
                response = server.dispatcher(frame)
            try:
                sock.sendall(response)
            except OSError:
                return


class TpmServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address, dispatcher: Dispatcher):
        super().__init__(address, _Handler)
        self.dispatcher = dispatcher
        self.lock = threading.Lock()

    @property
    def port(self) -> int:
        return self.server_address[1]


def serve(port: int, dispatcher: Dispatcher, host: str = "127.0.0.1") -> None:
    """Serve until interrupted."""
    with TpmServer((host, port), dispatcher) as server:
        log.info("TPM server listening on %s:%d", host, server.port)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass


def start_server(dispatcher: Dispatcher, port: int = 0, host: str = "127.0.0.1") -> TpmServer:
    """Start a server on a background thread; port 0 picks a free port."""
    server = TpmServer((host, port), dispatcher)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    return server


def stop_server(server: TpmServer) -> None:
    server.shutdown()
    server.server_close()


class TcpTransport:
    """Persistent client connection; one command in flight at a time."""

    def __init__(self, host: str = "127.0.0.1", port: int = DEFAULT_PORT, timeout: float = DEFAULT_TIMEOUT):
        self.host = host
        self.port = port
        self.timeout = timeout
        self._sock: socket.socket | None = None

    def connect(self) -> None:
        if self._sock is not None:
            return
        try:
            self._sock = socket.create_connection((self.host, self.port), timeout=self.timeout)
        except socket.timeout as e:
            raise TransportTimeout(f"connect to {self.host}:{self.port} timed out") from e
        except OSError as e:
            raise TransportError(f"cannot connect to {self.host}:{self.port}: {e}") from e
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)

    def close(self) -> None:
        if self._sock is not None:
            self._sock.close()
            self._sock = None

    def __enter__(self):
        self.connect()
        return self

    def __exit__(self, *exc):
        self.close()

    def call(self, command: bytes) -> bytes:
        if len(command) > MAX_FRAME:
            raise TransportError(f"command of {len(command)} bytes exceeds {MAX_FRAME}")
        self.connect()
        try:
            self._sock.sendall(command)
            response = read_frame(self._sock)
        except socket.timeout as e:
            self.close()
            raise TransportTimeout(f"no response within {self.timeout} s") from e
        except FrameError:
            self.close()
            raise
        except OSError as e:
            self.close()
            raise TransportError(str(e)) from e
        if response is None:
            self.close()
            raise TransportError("server closed the connection")
        return response

    __call__ = call


def client_call(host: str, port: int, command: bytes, timeout: float = DEFAULT_TIMEOUT) -> bytes:
    """Send one command on a fresh connection and return the response frame."""
    with TcpTransport(host, port, timeout) as transport:
        return transport.call(command)
