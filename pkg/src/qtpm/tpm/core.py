"""The TPM server: command dispatch and handlers.

``Tpm.dispatch`` takes one raw command frame and always returns one raw
response frame.  The pipeline is: parse header, look up the command,
read handles, check the password session, run the handler, serialize.
Every failure is reported in-band as a response code.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

from .. import dilithium, keccak, kyber
from ..rot import Phase, RotAbort, RotFormatError, RotSession
from . import constants as c
from .marshal import MarshalError, PasswordSession, Reader, TpmCommandHeader, build_response, tpm2b
from .nv import NvStore
from .objects import (
    SEED_SIZES,
    HandleTable,
    KeyObject,
    RotSlot,
    UnwrapError,
    default_attributes,
    keypair_from_seed,
    pack_sensitive,
    unpack_sensitive,
    unwrap_private,
    wrap_private,
)
from .rng import TpmRng

log = logging.getLogger(__name__)


class TpmError(Exception):
    """Raised inside handlers; carries the response code."""

    def __init__(self, rc: int, detail: str = ""):
        super().__init__(f"{c.rc_name(rc)}: {detail}" if detail else c.rc_name(rc))
        self.rc = rc


@dataclass(frozen=True)
class CommandSpec:
    handles: int
    auth: bool  # password session required for the first handle
    out_handles: int
    handler: str


COMMANDS = {
    c.TPM_CC_STARTUP: CommandSpec(0, False, 0, "startup"),
    c.TPM_CC_SHUTDOWN: CommandSpec(0, False, 0, "shutdown"),
    c.TPM_CC_CREATE_PRIMARY: CommandSpec(1, False, 1, "create_primary"),
    c.TPM_CC_CREATE: CommandSpec(1, True, 0, "create"),
    c.TPM_CC_LOAD: CommandSpec(1, True, 1, "load"),
    c.TPM_CC_FLUSH_CONTEXT: CommandSpec(0, False, 0, "flush_context"),
    c.TPM_CC_SIGN: CommandSpec(1, True, 0, "sign"),
    c.TPM_CC_VERIFY_SIGNATURE: CommandSpec(1, False, 0, "verify_signature"),
    c.TPM_CC_KYBER_ENCRYPT: CommandSpec(1, False, 0, "kyber_encrypt"),
    c.TPM_CC_KYBER_DECRYPT: CommandSpec(1, True, 0, "kyber_decrypt"),
    c.TPM_CC_KYBER_ENC: CommandSpec(1, False, 0, "kyber_enc"),
    c.TPM_CC_KYBER_DEC: CommandSpec(1, True, 0, "kyber_dec"),
    c.TPM_CC_ROT_MSG1: CommandSpec(0, False, 0, "rot_msg1"),
    c.TPM_CC_ROT_MSG2: CommandSpec(0, False, 0, "rot_msg2"),
    c.TPM_CC_ROT_MSG3: CommandSpec(0, False, 0, "rot_msg3"),
    c.TPM_CC_ROT_MSG4: CommandSpec(0, False, 0, "rot_msg4"),
}

SUPPORTED_ALGORITHMS = (c.TPM_ALG_KYBER768, c.TPM_ALG_DILITHIUM3)


class Tpm:
    """Single-threaded TPM state machine.

    ``nv_path`` names the backing file of the 64 kB NV image (None keeps it
    in memory only).  ``rng_seed`` switches the RNG to deterministic test
    mode.
    """

    def __init__(self, nv_path: str | os.PathLike | None = None, rng_seed: bytes | None = None):
        self.nv = NvStore(nv_path)
        self.rng = TpmRng(rng_seed)
        self.objects = HandleTable()
        self.rot = RotSlot()
        self.started = False

    # -- pipeline ------------------------------------------------------------------

    def dispatch(self, raw: bytes) -> bytes:
        try:
            handles, password, r, spec, sessions = self._parse(raw)
            out_handles, params = _HANDLERS[spec.handler](self, handles, password, r)
            return build_response(c.TPM_RC_SUCCESS, out_handles, params, sessions)
        except TpmError as e:
            return build_response(e.rc)
        except MarshalError:
            return build_response(c.TPM_RC_SIZE)
        except Exception:  # last line of defence: the device never crashes
            log.exception("handler failure")
            return build_response(c.TPM_RC_FAILURE)

    def _parse(self, raw: bytes):
        if len(raw) < c.HEADER_SIZE:
            raise TpmError(c.TPM_RC_SIZE, "short header")
        header = TpmCommandHeader.unpack(raw)
        if header.size != len(raw) or header.size > c.MAX_COMMAND_SIZE:
            raise TpmError(c.TPM_RC_SIZE, "commandSize does not match frame")
        if header.tag not in (c.TPM_ST_NO_SESSIONS, c.TPM_ST_SESSIONS):
            raise TpmError(c.TPM_RC_BAD_TAG)
        spec = COMMANDS.get(header.code)
        if spec is None:
            raise TpmError(c.TPM_RC_COMMAND_CODE)
        if not self.started and header.code != c.TPM_CC_STARTUP:
            raise TpmError(c.TPM_RC_INITIALIZE, "startup required")
        r = Reader(raw, c.HEADER_SIZE)
        handles = tuple(r.u32() for _ in range(spec.handles))
        password = None
        sessions = header.tag == c.TPM_ST_SESSIONS
        if sessions:
            if not spec.auth:
                raise TpmError(c.TPM_RC_AUTH_CONTEXT, "command takes no sessions")
            auth_size = r.u32()
            area = Reader(r.take(auth_size))
            session = PasswordSession.read(area)
            area.done()
            if session.handle != c.TPM_RS_PW:
                raise TpmError(c.TPM_RC_AUTH_CONTEXT, "only password sessions are supported")
            password = session.password
        elif spec.auth:
            raise TpmError(c.TPM_RC_AUTH_MISSING)
        return handles, password, r, spec, sessions

    # -- helpers -------------------------------------------------------------------

    def _object(self, handle: int) -> KeyObject:
        obj = self.objects.get(handle)
        if obj is None:
            raise TpmError(c.TPM_RC_HANDLE, f"handle 0x{handle:08X} not loaded")
        return obj

    def _authorized(self, handle: int, password: bytes) -> KeyObject:
        obj = self._object(handle)
        if not obj.check_auth(password):
            raise TpmError(c.TPM_RC_AUTH_FAIL)
        return obj

    def _keyed(self, obj: KeyObject, algorithm: int) -> None:
        if obj.algorithm != algorithm:
            raise TpmError(c.TPM_RC_KEY, "wrong key algorithm for this command")

    def _install(self, algorithm, seed, attributes, primary, parent, auth_digest) -> KeyObject:
        index = self.objects.free_index()
        if index is None:
            raise TpmError(c.TPM_RC_OBJECT_MEMORY)
        public, secret = keypair_from_seed(algorithm, seed)
        obj = KeyObject(
            handle=c.HR_TRANSIENT + index,
            algorithm=algorithm,
            public=public,
            sensitive=bytearray(secret),
            seed=bytearray(seed),
            attributes=attributes,
            primary=primary,
            parent=parent,
            auth_digest=auth_digest,
        )
        self.objects.install(index, obj)
        return obj

    @staticmethod
    def _algorithm(r: Reader) -> int:
        alg = r.u16()
        if alg not in SUPPORTED_ALGORITHMS:
            raise TpmError(c.TPM_RC_TYPE, f"algorithm 0x{alg:04X}")
        return alg

    def _reset_volatile(self) -> None:
        self.objects.clear()
        self.rot.release()

    # -- lifecycle -------------------------------------------------------------------

    def _cmd_startup(self, handles, password, r):
        startup_type = r.u16()
        r.done()
        if startup_type not in (c.TPM_SU_CLEAR, c.TPM_SU_STATE):
            raise TpmError(c.TPM_RC_VALUE)
        if self.started:
            raise TpmError(c.TPM_RC_INITIALIZE, "already started")
        if not self.nv.load():
            self.nv.format(self.rng(32))
        self.nv.increment_reset_count()
        self._reset_volatile()
        self.started = True
        return (), b""

    def _cmd_shutdown(self, handles, password, r):
        shutdown_type = r.u16()
        r.done()
        if shutdown_type not in (c.TPM_SU_CLEAR, c.TPM_SU_STATE):
            raise TpmError(c.TPM_RC_VALUE)
        self.nv.flush()
        self._reset_volatile()
        self.started = False
        return (), b""

    # -- key hierarchy -----------------------------------------------------------------

    def _cmd_create_primary(self, handles, password, r):
        (hierarchy,) = handles
        auth = r.tpm2b()
        alg = self._algorithm(r)
        r.done()
        if hierarchy != c.TPM_RH_OWNER:
            raise TpmError(c.TPM_RC_HANDLE, "only the owner hierarchy exists")
        seed = keccak.shake256(self.nv.primary_seed + b"primary" + alg.to_bytes(2, "big"), SEED_SIZES[alg])
        obj = self._install(alg, seed, default_attributes(alg, True), True, c.TPM_RH_OWNER, keccak.sha3_256(auth))
        return (obj.handle,), tpm2b(obj.public)

    def _cmd_create(self, handles, password, r):
        parent = self._authorized(handles[0], password)
        auth = r.tpm2b()
        alg = self._algorithm(r)
        r.done()
        if not parent.storage:
            raise TpmError(c.TPM_RC_TYPE, "parent is not a storage key")
        seed = self.rng(SEED_SIZES[alg])
        public, _ = keypair_from_seed(alg, seed)
        sensitive = pack_sensitive(alg, default_attributes(alg, False), keccak.sha3_256(auth), seed)
        private = wrap_private(parent.wrap_key(), self.rng(16), sensitive, public)
        return (), tpm2b(private) + tpm2b(public)

    def _cmd_load(self, handles, password, r):
        parent = self._authorized(handles[0], password)
        private = r.tpm2b()
        public = r.tpm2b()
        r.done()
        if not parent.storage:
            raise TpmError(c.TPM_RC_TYPE, "parent is not a storage key")
        try:
            alg, attrs, auth_digest, seed = unpack_sensitive(unwrap_private(parent.wrap_key(), private, public))
        except (UnwrapError, MarshalError):
            raise TpmError(c.TPM_RC_INTEGRITY, "private blob does not verify under this parent")
        if alg not in SUPPORTED_ALGORITHMS or len(seed) != SEED_SIZES[alg]:
            raise TpmError(c.TPM_RC_INTEGRITY, "malformed sensitive area")
        if self.objects.free_index() is None:
            raise TpmError(c.TPM_RC_OBJECT_MEMORY)
        obj = self._install(alg, seed, attrs, False, parent.handle, auth_digest)
        if obj.public != public:
            self.objects.flush(obj.handle)
            raise TpmError(c.TPM_RC_BINDING, "public area does not match private")
        return (obj.handle,), b""

    def _cmd_flush_context(self, handles, password, r):
        handle = r.u32()
        r.done()
        if not self.objects.flush(handle):
            raise TpmError(c.TPM_RC_HANDLE)
        return (), b""

    # -- signatures ----------------------------------------------------------------------

    def _cmd_sign(self, handles, password, r):
        obj = self._authorized(handles[0], password)
        digest = r.tpm2b()
        r.done()
        self._keyed(obj, c.TPM_ALG_DILITHIUM3)
        if len(digest) != 32:
            raise TpmError(c.TPM_RC_SIZE, "digest must be a 32-byte SHA3-256 value")
        return (), tpm2b(dilithium.sign(bytes(obj.sensitive), digest))

    def _cmd_verify_signature(self, handles, password, r):
        obj = self._object(handles[0])
        digest = r.tpm2b()
        signature = r.tpm2b()
        r.done()
        self._keyed(obj, c.TPM_ALG_DILITHIUM3)
        if len(digest) != 32:
            raise TpmError(c.TPM_RC_SIZE, "digest must be a 32-byte SHA3-256 value")
        if not dilithium.verify(obj.public, digest, signature):
            raise TpmError(c.TPM_RC_SIGNATURE)
        return (), b""

    # -- Kyber -----------------------------------------------------------------------------

    def _cmd_kyber_encrypt(self, handles, password, r):
        obj = self._object(handles[0])
        message = r.tpm2b()
        r.done()
        self._keyed(obj, c.TPM_ALG_KYBER768)
        if len(message) > kyber.MAX_DATA:
            raise TpmError(c.TPM_RC_SIZE, "message exceeds MAX_DATA")
        return (), tpm2b(kyber.data_encrypt(obj.public, message, self.rng))

    def _cmd_kyber_decrypt(self, handles, password, r):
        obj = self._authorized(handles[0], password)
        blob = r.tpm2b()
        r.done()
        self._keyed(obj, c.TPM_ALG_KYBER768)
        try:
            message = kyber.data_decrypt(bytes(obj.sensitive), blob)
        except kyber.IntegrityError:
            raise TpmError(c.TPM_RC_INTEGRITY)
        except kyber.KyberError:
            raise TpmError(c.TPM_RC_SIZE)
        return (), tpm2b(message)

    def _cmd_kyber_enc(self, handles, password, r):
        obj = self._object(handles[0])
        r.done()
        self._keyed(obj, c.TPM_ALG_KYBER768)
        ct, ss = kyber.encapsulate(obj.public, self.rng(32))
        return (), tpm2b(ss) + tpm2b(ct)

    def _cmd_kyber_dec(self, handles, password, r):
        obj = self._authorized(handles[0], password)
        ct = r.tpm2b()
        r.done()
        self._keyed(obj, c.TPM_ALG_KYBER768)
        if len(ct) != kyber.CIPHERTEXT_BYTES:
            raise TpmError(c.TPM_RC_SIZE)
        return (), tpm2b(kyber.decapsulate(bytes(obj.sensitive), ct))

    # -- ROT ---------------------------------------------------------------------------------

    def _rot_session(self, phase: Phase) -> RotSession:
        session = self.rot.session
        if session is None or session.phase is not phase:
            raise TpmError(c.TPM_RC_SEQUENCE, "no ROT session in the required phase")
        return session

    def _cmd_rot_msg1(self, handles, password, r):
        choice = r.u8()
        r.done()
        if choice not in (0, 1):
            raise TpmError(c.TPM_RC_VALUE, "choice bit")
        if self.rot.occupied:
            raise TpmError(c.TPM_RC_SESSION_MEMORY, "ROT session slot in use")
        session = RotSession(self.rng(32))
        msg = session.msg1(choice)
        self.rot.session = session
        return (), tpm2b(msg)

    def _cmd_rot_msg2(self, handles, password, r):
        msg1 = r.tpm2b()
        r.done()
        if self.rot.occupied:
            raise TpmError(c.TPM_RC_SESSION_MEMORY, "ROT session slot in use")
        session = RotSession(self.rng(32))
        try:
            msg = session.msg2(msg1)
        except RotFormatError:
            raise TpmError(c.TPM_RC_SIZE, "malformed MSG1")
        self.rot.session = session
        return (), tpm2b(msg)

    def _cmd_rot_msg3(self, handles, password, r):
        msg2 = r.tpm2b()
        r.done()
        session = self._rot_session(Phase.SENT_MSG1)
        try:
            msg3, output = session.msg3(msg2)
        except RotFormatError:
            raise TpmError(c.TPM_RC_SIZE, "malformed MSG2")
        except RotAbort:
            self.rot.release()
            raise TpmError(c.TPM_RC_INTEGRITY, "ROT challenge mismatch")
        self.rot.release()
        return (), tpm2b(msg3) + tpm2b(output.message)

    def _cmd_rot_msg4(self, handles, password, r):
        msg3 = r.tpm2b()
        r.done()
        session = self._rot_session(Phase.SENT_MSG2)
        try:
            output = session.msg4(msg3)
        except RotFormatError:
            raise TpmError(c.TPM_RC_SIZE, "malformed MSG3")
        except RotAbort:
            self.rot.release()
            raise TpmError(c.TPM_RC_INTEGRITY, "ROT confirmation mismatch")
        self.rot.release()
        return (), tpm2b(output.m0) + tpm2b(output.m1)


# resolved once: building method names per call leaves fresh strings in the
# interpreter's method cache, which shows up as slow heap growth in a soak
_HANDLERS = {spec.handler: getattr(Tpm, "_cmd_" + spec.handler) for spec in COMMANDS.values()}
