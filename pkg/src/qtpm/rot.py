"""1-out-of-2 random oblivious transfer over Z_13313[x]/(x^512 + 1).

Four messages, receiver first:

    MSG1  R -> S   p_R || session_seed                       928 bytes
    MSG2  S -> R   p_S || sigma || c_0 || c_1               1024 bytes
    MSG3  R -> S   confirmation hash                          32 bytes
    MSG4  (local)  sender outputs m_0 || m_1                  64 bytes

Agreement uses Ding-style reconciliation: both parties hold ring elements
that differ by an even, small error; the sender publishes the signal
vector sigma and both extract the same bit per coefficient with mod2.
Keys are k_i = SHA3-256(kappa || i) and the challenges c_i bind them.

This instantiation gives correctness and a choice-independent first
message.  It does not claim the simulation-based security of the
construction it is shaped after.
"""

from __future__ import annotations

import enum
import hmac
from dataclasses import dataclass

import numpy as np

from . import keccak
from .ring import ROT, RingParams, centered, intt, ntt, pack_bits, pointwise, sample_cbd, sample_uniform, unpack_bits

SEED_BYTES = 32
KEY_BYTES = 32
COEFF_BITS = 14


@dataclass(frozen=True)
class RotParams:
    ring: RingParams = ROT
    eta: int = 2

    @property
    def poly_bytes(self) -> int:
        return self.ring.n * COEFF_BITS // 8

    @property
    def bits_bytes(self) -> int:
        return self.ring.n // 8

    @property
    def msg1_bytes(self) -> int:
        return self.poly_bytes + SEED_BYTES

    @property
    def msg2_bytes(self) -> int:
        return self.poly_bytes + self.bits_bytes + 2 * KEY_BYTES

    msg3_bytes = KEY_BYTES

    def public_element(self, session_seed: bytes) -> np.ndarray:
        """The shared ring element a, expanded from the session seed with SHAKE128."""
        return sample_uniform(keccak.Shake128(session_seed), self.ring)


DEFAULT_PARAMS = RotParams()


class RotError(Exception):
    pass


class RotPhaseError(RotError):
    """A message arrived in a phase that does not accept it."""


class RotAbort(RotError):
    """A challenge or confirmation did not verify."""


class RotFormatError(RotError, ValueError):
    """A message has the wrong length or an out-of-range coefficient."""


class Phase(enum.Enum):
    INIT = "init"
    SENT_MSG1 = "sent_msg1"  # receiver waiting for MSG2
    SENT_MSG2 = "sent_msg2"  # sender waiting for MSG3
    DONE = "done"


@dataclass(frozen=True)
class ReceiverOutput:
    choice: int
    message: bytes


@dataclass(frozen=True)
class SenderOutput:
    m0: bytes
    m1: bytes

    def __getitem__(self, i: int) -> bytes:
        return (self.m0, self.m1)[i]


# -- reconciliation -------------------------------------------------------------

def signal(v, q: int = ROT.q) -> np.ndarray:
    """0 where the centered value lies in [-floor(q/4), floor(q/4)], else 1."""
    c = centered(v, q)
    return (np.abs(c) > q // 4).astype(np.int64)


def mod2(v, sigma, q: int = ROT.q) -> np.ndarray:
    """Key bit: parity of the centered representative of v + sigma*(q-1)/2."""
    shifted = centered(np.asarray(v, dtype=np.int64) + np.asarray(sigma, dtype=np.int64) * ((q - 1) // 2), q)
    return shifted & 1


def _derive_keys(kappa_bits) -> tuple[bytes, bytes]:
    kappa = pack_bits(kappa_bits, 1)
    return keccak.sha3_256(kappa + b"\x00"), keccak.sha3_256(kappa + b"\x01")


def _challenge(k: bytes) -> bytes:
    return keccak.sha3_256(k + b"chal")


def _confirmation(k: bytes, other_challenge: bytes) -> bytes:
    response = keccak.sha3_256(k + other_challenge)
    return keccak.sha3_256(k + b"conf" + response)


# -- wire packing -----------------------------------------------------------------

def pack_poly(p, params: RotParams = DEFAULT_PARAMS) -> bytes:
    return pack_bits(np.asarray(p) % params.ring.q, COEFF_BITS)


def unpack_poly(data: bytes, params: RotParams = DEFAULT_PARAMS) -> np.ndarray:
    if len(data) != params.poly_bytes:
        raise RotFormatError(f"packed polynomial must be {params.poly_bytes} bytes")
    p = unpack_bits(data, COEFF_BITS, params.ring.n)
    if (p >= params.ring.q).any():
        raise RotFormatError("coefficient out of range")
    return p


def split_msg2(msg2: bytes, params: RotParams = DEFAULT_PARAMS):
    if len(msg2) != params.msg2_bytes:
        raise RotFormatError(f"MSG2 must be {params.msg2_bytes} bytes, got {len(msg2)}")
    pb, bb = params.poly_bytes, params.bits_bytes
    p_s = unpack_poly(msg2[:pb], params)
    sigma = unpack_bits(msg2[pb:pb + bb], 1, params.ring.n)
    c0 = msg2[pb + bb:pb + bb + KEY_BYTES]
    c1 = msg2[pb + bb + KEY_BYTES:]
    return p_s, sigma, c0, c1


# -- session ------------------------------------------------------------------------

class RotSession:
    """One party's state for a single protocol run.

    A fresh session is in INIT and becomes a receiver with :meth:`msg1` or a
    sender with :meth:`msg2`.  Each phase accepts exactly one message; the
    secrets are zeroized when the session reaches DONE.
    """

    def __init__(self, seed: bytes, params: RotParams = DEFAULT_PARAMS):
        if len(seed) != SEED_BYTES:
            raise ValueError("session randomness seed is 32 bytes")
        self.params = params
        self.phase = Phase.INIT
        self.role = None
        self._seed = bytearray(seed)
        self.choice = None
        self.session_seed = None
        self.secret = None
        self.error = None
        self.keys = None
        self.challenges = None

    def _noise(self, label: bytes) -> np.ndarray:
        ring = self.params.ring
        data = keccak.shake256(bytes(self._seed) + label, ring.n * self.params.eta // 4)
        return sample_cbd(data, self.params.eta, ring)

    def _mul(self, a, b) -> np.ndarray:
        ring = self.params.ring
        return intt(pointwise(ntt(a, ring), ntt(b, ring), ring), ring)

    def _expect(self, phase: Phase, what: str) -> None:
        if self.phase is not phase:
            raise RotPhaseError(f"{what} not accepted in phase {self.phase.name}")

    # receiver, first message
    def msg1(self, choice: int) -> bytes:
        self._expect(Phase.INIT, "MSG1")
        if choice not in (0, 1):
            raise ValueError("choice bit must be 0 or 1")
        q = self.params.ring.q
        self.role = "receiver"
        self.choice = choice
        self.session_seed = keccak.shake256(bytes(self._seed) + b"session", SEED_BYTES)
        a = self.params.public_element(self.session_seed)
        self.secret = self._noise(b"s")
        self.error = self._noise(b"e")
        p_r = (self._mul(a, self.secret) + 2 * self.error) % q
        self.phase = Phase.SENT_MSG1
        return pack_poly(p_r, self.params) + self.session_seed

    # sender, first message
    def msg2(self, msg1: bytes) -> bytes:
        self._expect(Phase.INIT, "MSG2")
        params = self.params
        if len(msg1) != params.msg1_bytes:
            raise RotFormatError(f"MSG1 must be {params.msg1_bytes} bytes, got {len(msg1)}")
        q = params.ring.q
        p_r = unpack_poly(msg1[:params.poly_bytes], params)
        self.role = "sender"
        self.session_seed = bytes(msg1[params.poly_bytes:])
        a = params.public_element(self.session_seed)
        self.secret = self._noise(b"s")
        self.error = self._noise(b"e")
        e_prime = self._noise(b"e'")
        p_s = (self._mul(a, self.secret) + 2 * self.error) % q
        v = (self._mul(p_r, self.secret) + 2 * e_prime) % q
        sigma = signal(v, q)
        self.keys = _derive_keys(mod2(v, sigma, q))
        self.challenges = (_challenge(self.keys[0]), _challenge(self.keys[1]))
        self.phase = Phase.SENT_MSG2
        return pack_poly(p_s, params) + pack_bits(sigma, 1) + self.challenges[0] + self.challenges[1]

    # receiver, second message
    def msg3(self, msg2: bytes) -> tuple[bytes, ReceiverOutput]:
        self._expect(Phase.SENT_MSG1, "MSG3")
        q = self.params.ring.q
        p_s, sigma, c0, c1 = split_msg2(msg2, self.params)
        b = self.choice
        v_prime = self._mul(p_s, self.secret)
        kappa = pack_bits(mod2(v_prime, sigma, q), 1)
        k_b = keccak.sha3_256(kappa + bytes([b]))
        expected, other = (c0, c1) if b == 0 else (c1, c0)
        if not hmac.compare_digest(_challenge(k_b), expected):
            self._finish()
            raise RotAbort("sender challenge does not match the reconciled key")
        confirmation = _confirmation(k_b, other)
        self._finish()
        return confirmation, ReceiverOutput(b, k_b)

    # sender, final step
    def msg4(self, msg3: bytes) -> SenderOutput:
        self._expect(Phase.SENT_MSG2, "MSG4")
        if len(msg3) != self.params.msg3_bytes:
            raise RotFormatError(f"MSG3 must be {self.params.msg3_bytes} bytes, got {len(msg3)}")
        k0, k1 = self.keys
        c0, c1 = self.challenges
        ok0 = hmac.compare_digest(_confirmation(k0, c1), msg3)
        ok1 = hmac.compare_digest(_confirmation(k1, c0), msg3)
        out = SenderOutput(k0, k1)
        self._finish()
        if not (ok0 | ok1):
            raise RotAbort("receiver confirmation matches neither key")
        return out

    def _finish(self) -> None:
        for arr in (self.secret, self.error):
            if arr is not None:
                arr.fill(0)
        self._seed[:] = bytes(len(self._seed))
        self.keys = None
        self.phase = Phase.DONE


def rot_msg1(params: RotParams, choice: int, seed: bytes) -> tuple[RotSession, bytes]:
    session = RotSession(seed, params)
    return session, session.msg1(choice)


def rot_msg2(params: RotParams, msg1: bytes, seed: bytes) -> tuple[RotSession, bytes]:
    session = RotSession(seed, params)
    return session, session.msg2(msg1)


def rot_msg3(session: RotSession, msg2: bytes) -> tuple[bytes, ReceiverOutput]:
    return session.msg3(msg2)


def rot_msg4(session: RotSession, msg3: bytes) -> SenderOutput:
    return session.msg4(msg3)


def run_session(choice: int, receiver_seed: bytes, sender_seed: bytes, params: RotParams = DEFAULT_PARAMS):
    """All four messages in-process; returns (receiver output, sender output)."""
    receiver, m1 = rot_msg1(params, choice, receiver_seed)
    sender, m2 = rot_msg2(params, m1, sender_seed)
    m3, r_out = rot_msg3(receiver, m2)
    return r_out, rot_msg4(sender, m3)
