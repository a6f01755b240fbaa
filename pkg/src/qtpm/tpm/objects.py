"""Key objects, the fixed-size handle table and private-blob wrapping."""

from __future__ import annotations

import hmac
from dataclasses import dataclass

from .. import dilithium, keccak, kyber
from ..rot import RotSession
from .constants import (
    HR_TRANSIENT,
    TPM_ALG_DILITHIUM3,
    TPM_ALG_KYBER768,
    TPMA_OBJECT_DECRYPT,
    TPMA_OBJECT_FIXEDPARENT,
    TPMA_OBJECT_FIXEDTPM,
    TPMA_OBJECT_RESTRICTED,
    TPMA_OBJECT_SIGN,
    TPMA_OBJECT_USERWITHAUTH,
)
from .marshal import Reader, tpm2b, u16, u32

TRANSIENT_SLOTS = 8
WRAP_NONCE_BYTES = 16
WRAP_TAG_BYTES = 32

SEED_SIZES = {TPM_ALG_KYBER768: 64, TPM_ALG_DILITHIUM3: 32}


def keypair_from_seed(algorithm: int, seed: bytes) -> tuple[bytes, bytes]:
    """Expand a stored key seed into (public, secret) key bytes."""
    if algorithm == TPM_ALG_KYBER768:
        return kyber.keygen(seed[:32], seed[32:64])
    if algorithm == TPM_ALG_DILITHIUM3:
        return dilithium.keygen(seed)
    raise ValueError(f"unsupported algorithm 0x{algorithm:04X}")


def default_attributes(algorithm: int, primary: bool) -> int:
    attrs = TPMA_OBJECT_FIXEDTPM | TPMA_OBJECT_FIXEDPARENT | TPMA_OBJECT_USERWITHAUTH
    attrs |= TPMA_OBJECT_SIGN if algorithm == TPM_ALG_DILITHIUM3 else TPMA_OBJECT_DECRYPT
    if primary:
        attrs |= TPMA_OBJECT_RESTRICTED
    return attrs


@dataclass
class KeyObject:
    handle: int
    algorithm: int
    public: bytes
    sensitive: bytearray  # expanded secret key
    seed: bytearray
    attributes: int
    primary: bool
    parent: int
    auth_digest: bytes

    @property
    def fixed_tpm(self) -> bool:
        return bool(self.attributes & TPMA_OBJECT_FIXEDTPM)

    @property
    def fixed_parent(self) -> bool:
        return bool(self.attributes & TPMA_OBJECT_FIXEDPARENT)

    @property
    def storage(self) -> bool:
        # restricted decryption primaries are the only parents
        need = TPMA_OBJECT_RESTRICTED | TPMA_OBJECT_DECRYPT
        return self.primary and self.attributes & need == need

    def check_auth(self, password: bytes) -> bool:
        return hmac.compare_digest(keccak.sha3_256(password), self.auth_digest)

    def wrap_key(self) -> bytes:
        return keccak.shake256(bytes(self.seed) + b"wrap", 32)

    def zeroize(self) -> None:
        self.sensitive[:] = bytes(len(self.sensitive))
        self.seed[:] = bytes(len(self.seed))


class HandleTable:
    """Eight transient object slots; never grows."""

    def __init__(self, capacity: int = TRANSIENT_SLOTS):
        self._slots: list[KeyObject | None] = [None] * capacity

    @property
    def capacity(self) -> int:
        return len(self._slots)

    def free_index(self) -> int | None:
        for i, obj in enumerate(self._slots):
            if obj is None:
                return i
        return None

    def install(self, index: int, obj: KeyObject) -> None:
        self._slots[index] = obj

    def get(self, handle: int) -> KeyObject | None:
        index = handle - HR_TRANSIENT
        if 0 <= index < len(self._slots):
            return self._slots[index]
        return None

    def flush(self, handle: int) -> bool:
        obj = self.get(handle)
        if obj is None:
            return False
        obj.zeroize()
        self._slots[handle - HR_TRANSIENT] = None
        return True

    def clear(self) -> None:
        for i, obj in enumerate(self._slots):
            if obj is not None:
                obj.zeroize()
                self._slots[i] = None

    def __len__(self):
        return sum(obj is not None for obj in self._slots)


class RotSlot:
    """The single volatile ROT session slot."""

    def __init__(self):
        self.session: RotSession | None = None

    @property
    def occupied(self) -> bool:
        return self.session is not None

    def release(self) -> None:
        self.session = None


# -- private blob wrapping -------------------------------------------------------
#
# sensitive = alg:u16 | attributes:u32 | authDigest:TPM2B | seed:TPM2B
# private   = nonce(16) | sensitive XOR SHAKE256(wrapKey || nonce) | tag(32)
# tag       = SHA3-256(wrapKey || nonce || sensitive || SHA3-256(public))

def pack_sensitive(algorithm: int, attributes: int, auth_digest: bytes, seed: bytes) -> bytes:
    return u16(algorithm) + u32(attributes) + tpm2b(auth_digest) + tpm2b(seed)


def unpack_sensitive(data: bytes) -> tuple[int, int, bytes, bytes]:
    r = Reader(data)
    algorithm = r.u16()
    attributes = r.u32()
    auth_digest = r.tpm2b()
    seed = r.tpm2b()
    r.done()
    return algorithm, attributes, auth_digest, seed


def _xor(a: bytes, b: bytes) -> bytes:
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(len(a), "big")


def wrap_private(wrap_key: bytes, nonce: bytes, sensitive: bytes, public: bytes) -> bytes:
    pad = keccak.shake256(wrap_key + nonce, len(sensitive))
    tag = keccak.sha3_256(wrap_key + nonce + sensitive + keccak.sha3_256(public))
    return nonce + _xor(sensitive, pad) + tag


class UnwrapError(Exception):
    pass


def unwrap_private(wrap_key: bytes, private: bytes, public: bytes) -> bytes:
    if len(private) < WRAP_NONCE_BYTES + WRAP_TAG_BYTES:
        raise UnwrapError("private blob too short")
    nonce = private[:WRAP_NONCE_BYTES]
    body = private[WRAP_NONCE_BYTES:-WRAP_TAG_BYTES]
    tag = private[-WRAP_TAG_BYTES:]
    sensitive = _xor(body, keccak.shake256(wrap_key + nonce, len(body)))
    expected = keccak.sha3_256(wrap_key + nonce + sensitive + keccak.sha3_256(public))
    if not hmac.compare_digest(tag, expected):
        raise UnwrapError("private blob integrity check failed")
    return sensitive


def public_size(algorithm: int) -> int:
    return {TPM_ALG_KYBER768: kyber.PUBLIC_KEY_BYTES, TPM_ALG_DILITHIUM3: dilithium.PUBLIC_KEY_BYTES}[algorithm]

