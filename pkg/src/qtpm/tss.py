"""Client-side TSS: command builders and a typed client.

The ``cmd_*`` builders are pure functions returning wire bytes, so the CLI,
the bench harness and the golden-transcript tests all produce identical
frames.  ``TssClient`` sends them through any callable transport (a
``TcpTransport`` or simply ``Tpm.dispatch``) and decodes the response.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .tpm import constants as c
from .tpm.marshal import Reader, build_command, parse_response, tpm2b, u8, u16, u32


class TpmResponseError(Exception):
    """The TPM answered with a non-zero response code."""

    def __init__(self, rc: int, command: int | None = None):
        name = c.COMMAND_NAMES.get(command, "command") if command is not None else "command"
        super().__init__(f"{name} failed: {c.rc_name(rc)} (0x{rc:03X})")
        self.rc = rc
        self.command = command

    @property
    def rc_name(self) -> str:
        return c.rc_name(self.rc)


# -- command builders -------------------------------------------------------------

def cmd_startup(startup_type: int = c.TPM_SU_CLEAR) -> bytes:
    return build_command(c.TPM_CC_STARTUP, params=u16(startup_type))


def cmd_shutdown(shutdown_type: int = c.TPM_SU_CLEAR) -> bytes:
    return build_command(c.TPM_CC_SHUTDOWN, params=u16(shutdown_type))


def cmd_create_primary(algorithm: int, auth: bytes = b"") -> bytes:
    return build_command(c.TPM_CC_CREATE_PRIMARY, (c.TPM_RH_OWNER,), tpm2b(auth) + u16(algorithm))


def cmd_create(parent: int, algorithm: int, auth: bytes = b"", parent_auth: bytes = b"") -> bytes:
    return build_command(c.TPM_CC_CREATE, (parent,), tpm2b(auth) + u16(algorithm), parent_auth)


def cmd_load(parent: int, private: bytes, public: bytes, parent_auth: bytes = b"") -> bytes:
    return build_command(c.TPM_CC_LOAD, (parent,), tpm2b(private) + tpm2b(public), parent_auth)


def cmd_flush_context(handle: int) -> bytes:
    return build_command(c.TPM_CC_FLUSH_CONTEXT, params=u32(handle))


def cmd_sign(key: int, digest: bytes, auth: bytes = b"") -> bytes:
    return build_command(c.TPM_CC_SIGN, (key,), tpm2b(digest), auth)


def cmd_verify_signature(key: int, digest: bytes, signature: bytes) -> bytes:
    return build_command(c.TPM_CC_VERIFY_SIGNATURE, (key,), tpm2b(digest) + tpm2b(signature))


def cmd_kyber_encrypt(key: int, message: bytes) -> bytes:
    return build_command(c.TPM_CC_KYBER_ENCRYPT, (key,), tpm2b(message))


def cmd_kyber_decrypt(key: int, blob: bytes, auth: bytes = b"") -> bytes:
    return build_command(c.TPM_CC_KYBER_DECRYPT, (key,), tpm2b(blob), auth)


def cmd_kyber_enc(key: int) -> bytes:
    return build_command(c.TPM_CC_KYBER_ENC, (key,))


def cmd_kyber_dec(key: int, ciphertext: bytes, auth: bytes = b"") -> bytes:
    return build_command(c.TPM_CC_KYBER_DEC, (key,), tpm2b(ciphertext), auth)


def cmd_rot_msg1(choice: int) -> bytes:
    return build_command(c.TPM_CC_ROT_MSG1, params=u8(choice))


def cmd_rot_msg2(msg1: bytes) -> bytes:
    return build_command(c.TPM_CC_ROT_MSG2, params=tpm2b(msg1))


def cmd_rot_msg3(msg2: bytes) -> bytes:
    return build_command(c.TPM_CC_ROT_MSG3, params=tpm2b(msg2))


def cmd_rot_msg4(msg3: bytes) -> bytes:
    return build_command(c.TPM_CC_ROT_MSG4, params=tpm2b(msg3))


# -- client -------------------------------------------------------------------------

@dataclass(frozen=True)
class CreatedKey:
    private: bytes
    public: bytes


class TssClient:
    def __init__(self, transport: Callable[[bytes], bytes]):
        self.transport = transport

    def _call(self, command: bytes, handle_count: int = 0):
        code = int.from_bytes(command[6:10], "big")
        response = parse_response(self.transport(command), handle_count)
        if not response.ok:
            raise TpmResponseError(response.rc, code)
        return response

    def _tpm2bs(self, command: bytes, count: int) -> tuple[bytes, ...]:
        r = Reader(self._call(command).params)
        out = tuple(r.tpm2b() for _ in range(count))
        r.done()
        return out

    def startup(self, startup_type: int = c.TPM_SU_CLEAR) -> None:
        self._call(cmd_startup(startup_type))

    def shutdown(self, shutdown_type: int = c.TPM_SU_CLEAR) -> None:
        self._call(cmd_shutdown(shutdown_type))

    def create_primary(self, algorithm: int, auth: bytes = b"") -> tuple[int, bytes]:
        response = self._call(cmd_create_primary(algorithm, auth), 1)
        r = Reader(response.params)
        public = r.tpm2b()
        r.done()
        return response.handles[0], public

    def create(self, parent: int, algorithm: int, auth: bytes = b"", parent_auth: bytes = b"") -> CreatedKey:
        private, public = self._tpm2bs(cmd_create(parent, algorithm, auth, parent_auth), 2)
        return CreatedKey(private, public)

    def load(self, parent: int, private: bytes, public: bytes, parent_auth: bytes = b"") -> int:
        return self._call(cmd_load(parent, private, public, parent_auth), 1).handles[0]

    def flush_context(self, handle: int) -> None:
        self._call(cmd_flush_context(handle))

    def sign(self, key: int, digest: bytes, auth: bytes = b"") -> bytes:
        return self._tpm2bs(cmd_sign(key, digest, auth), 1)[0]

    def verify_signature(self, key: int, digest: bytes, signature: bytes) -> None:
        """Returns on acceptance; a rejected signature raises TpmResponseError."""
        self._call(cmd_verify_signature(key, digest, signature))

    def kyber_encrypt(self, key: int, message: bytes) -> bytes:
        return self._tpm2bs(cmd_kyber_encrypt(key, message), 1)[0]

    def kyber_decrypt(self, key: int, blob: bytes, auth: bytes = b"") -> bytes:
        return self._tpm2bs(cmd_kyber_decrypt(key, blob, auth), 1)[0]

    def kyber_enc(self, key: int) -> tuple[bytes, bytes]:
        """Returns (shared_secret, ciphertext)."""
        ss, ct = self._tpm2bs(cmd_kyber_enc(key), 2)
        return ss, ct

    def kyber_dec(self, key: int, ciphertext: bytes, auth: bytes = b"") -> bytes:
        return self._tpm2bs(cmd_kyber_dec(key, ciphertext, auth), 1)[0]

    def rot_msg1(self, choice: int) -> bytes:
        return self._tpm2bs(cmd_rot_msg1(choice), 1)[0]

    def rot_msg2(self, msg1: bytes) -> bytes:
        return self._tpm2bs(cmd_rot_msg2(msg1), 1)[0]

    def rot_msg3(self, msg2: bytes) -> tuple[bytes, bytes]:
        """Returns (msg3, m_b)."""
        msg3, mb = self._tpm2bs(cmd_rot_msg3(msg2), 2)
        return msg3, mb

    def rot_msg4(self, msg3: bytes) -> tuple[bytes, bytes]:
        """Returns (m0, m1)."""
        m0, m1 = self._tpm2bs(cmd_rot_msg4(msg3), 2)
        return m0, m1


def rot_exchange(receiver: TssClient, sender: TssClient, choice: int) -> tuple[bytes, tuple[bytes, bytes]]:
    """Drive one full four-message ROT between two TPMs."""
    msg1 = receiver.rot_msg1(choice)
    msg2 = sender.rot_msg2(msg1)
    msg3, mb = receiver.rot_msg3(msg2)
    m0, m1 = sender.rot_msg4(msg3)
    return mb, (m0, m1)
