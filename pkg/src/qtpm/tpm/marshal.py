"""Big-endian marshalling for TPM command and response frames.

Command layout::

    tag:u16 | commandSize:u32 | commandCode:u32 | handles:u32* |
    [authorizationSize:u32 | password session] | parameters

A password session is ``TPM_RS_PW | nonce:TPM2B | attributes:u8 | hmac:TPM2B``
with the password in the hmac field.  Responses to session commands carry
``parameterSize:u32`` after the output handles and a trailing empty
session acknowledgement, as on a real TPM.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .constants import (
    HEADER_SIZE,
    TPM_RC_SUCCESS,
    TPM_RS_PW,
    TPM_ST_NO_SESSIONS,
    TPM_ST_SESSIONS,
)

_HEADER = struct.Struct(">HII")


class MarshalError(ValueError):
    """Buffer ended early or a length field is inconsistent."""


def u8(v: int) -> bytes:
    return struct.pack(">B", v)


def u16(v: int) -> bytes:
    return struct.pack(">H", v)


def u32(v: int) -> bytes:
    return struct.pack(">I", v)


def tpm2b(data: bytes) -> bytes:
    if len(data) > 0xFFFF:
        raise MarshalError("TPM2B payload exceeds 65535 bytes")
    return u16(len(data)) + bytes(data)


class Reader:
    """Sequential bounded reader over a byte buffer."""

    __slots__ = ("data", "pos", "end")

    def __init__(self, data: bytes, pos: int = 0, end: int | None = None):
        self.data = data
        self.pos = pos
        self.end = len(data) if end is None else end

    @property
    def remaining(self) -> int:
        return self.end - self.pos

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > self.end:
            raise MarshalError(f"need {n} bytes, {self.remaining} left")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return bytes(out)

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def tpm2b(self) -> bytes:
        return self.take(self.u16())

    def done(self) -> None:
        if self.remaining:
            raise MarshalError(f"{self.remaining} trailing bytes")


@dataclass(frozen=True)
class TpmCommandHeader:
    tag: int
    size: int
    code: int

    def pack(self) -> bytes:
        return _HEADER.pack(self.tag, self.size, self.code)

    @classmethod
    def unpack(cls, raw: bytes) -> "TpmCommandHeader":
        if len(raw) < HEADER_SIZE:
            raise MarshalError("header is 10 bytes")
        return cls(*_HEADER.unpack_from(raw))


@dataclass(frozen=True)
class PasswordSession:
    password: bytes = b""
    handle: int = TPM_RS_PW
    nonce: bytes = b""
    attributes: int = 0

    def pack(self) -> bytes:
        return u32(self.handle) + tpm2b(self.nonce) + u8(self.attributes) + tpm2b(self.password)

    @classmethod
    def read(cls, r: Reader) -> "PasswordSession":
        handle = r.u32()
        nonce = r.tpm2b()
        attributes = r.u8()
        password = r.tpm2b()
        return cls(password=password, handle=handle, nonce=nonce, attributes=attributes)


def build_command(code: int, handles=(), params: bytes = b"", password: bytes | None = None) -> bytes:
    """Serialize a command; a password session is attached when ``password`` is not None."""
    body = b"".join(u32(h) for h in handles)
    if password is None:
        tag = TPM_ST_NO_SESSIONS
    else:
        tag = TPM_ST_SESSIONS
        auth = PasswordSession(password).pack()
        body += u32(len(auth)) + auth
    body += params
    return TpmCommandHeader(tag, HEADER_SIZE + len(body), code).pack() + body


_EMPTY_ACK = tpm2b(b"") + u8(0) + tpm2b(b"")


def build_response(rc: int, handles=(), params: bytes = b"", sessions: bool = False) -> bytes:
    if rc != TPM_RC_SUCCESS:
        return _HEADER.pack(TPM_ST_NO_SESSIONS, HEADER_SIZE, rc)
    body = b"".join(u32(h) for h in handles)
    if sessions:
        body += u32(len(params)) + params + _EMPTY_ACK
        tag = TPM_ST_SESSIONS
    else:
        body += params
        tag = TPM_ST_NO_SESSIONS
    return _HEADER.pack(tag, HEADER_SIZE + len(body), rc) + body


@dataclass(frozen=True)
class TpmResponse:
    tag: int
    size: int
    rc: int
    handles: tuple = ()
    params: bytes = b""

    @property
    def ok(self) -> bool:
        return self.rc == TPM_RC_SUCCESS


def parse_response(raw: bytes, handle_count: int = 0) -> TpmResponse:
    """Split a response frame; ``handle_count`` is the command's output handle count."""
    if len(raw) < HEADER_SIZE:
        raise MarshalError("response shorter than its header")
    tag, size, rc = _HEADER.unpack_from(raw)
    if size != len(raw):
        raise MarshalError(f"responseSize {size} != frame length {len(raw)}")
    if rc != TPM_RC_SUCCESS:
        return TpmResponse(tag, size, rc)
    r = Reader(raw, HEADER_SIZE)
    handles = tuple(r.u32() for _ in range(handle_count))
    if tag == TPM_ST_SESSIONS:
        params = r.take(r.u32())
        # session acknowledgement: nonce, attributes, hmac
        r.tpm2b()
        r.u8()
        r.tpm2b()
    else:
        params = r.take(r.remaining)
    r.done()
    return TpmResponse(tag, size, rc, handles, params)
