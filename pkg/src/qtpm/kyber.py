"""Kyber-768 (round 3) KEM and the hybrid data cipher used by the TPM.

Keys, ciphertexts and shared secrets are plain ``bytes`` laid out exactly
as in the round-3 reference implementation:

    public key  = encode12(t_hat) || rho                          1184 bytes
    secret key  = encode12(s_hat) || public key || H(pk) || z     2400 bytes
    ciphertext  = compress10(u) || compress4(v)                   1088 bytes

The hybrid mode wraps arbitrary short data as

    KEM ciphertext || nonce(16) || plaintext XOR SHAKE256(ss || nonce) || SHA3-256(ss || plaintext)
"""

from __future__ import annotations

import hmac
import os
from typing import Callable

import numpy as np

from . import keccak
from .ring import KYBER, intt, matvec, dot, ntt, pack_bits, sample_cbd, sample_uniform, unpack_bits

K = 3
ETA1 = 2
ETA2 = 2
DU = 10
DV = 4
N = KYBER.n
Q = KYBER.q

SYMBYTES = 32
POLYVEC_BYTES = K * N * 12 // 8
PUBLIC_KEY_BYTES = POLYVEC_BYTES + SYMBYTES
SECRET_KEY_BYTES = POLYVEC_BYTES + PUBLIC_KEY_BYTES + 2 * SYMBYTES
CIPHERTEXT_BYTES = (K * N * DU + N * DV) // 8
SHARED_SECRET_BYTES = 32

NONCE_BYTES = 16
TAG_BYTES = 32
MAX_DATA = 1024
HYBRID_OVERHEAD = CIPHERTEXT_BYTES + NONCE_BYTES + TAG_BYTES


class KyberError(ValueError):
    """Malformed key or ciphertext length, or oversize plaintext."""


class IntegrityError(Exception):
    """Hybrid ciphertext failed its integrity check."""


def _h(data: bytes) -> bytes:
    return keccak.sha3_256(data)


def _g(data: bytes) -> tuple[bytes, bytes]:
    out = keccak.sha3_512(data)
    return out[:32], out[32:]


def _prf(seed: bytes, nonce: int, eta: int) -> bytes:
    return keccak.shake256(seed + bytes([nonce]), 64 * eta)


def _kdf(data: bytes) -> bytes:
    return keccak.shake256(data, SHARED_SECRET_BYTES)


def compress(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    return (((x << d) + Q // 2) // Q) & ((1 << d) - 1)


def decompress(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    return (x * Q + (1 << (d - 1))) >> d


def gen_matrix(rho: bytes, transposed: bool = False) -> np.ndarray:
    """Expand rho into the NTT-domain matrix A (or its transpose)."""
    a = np.empty((K, K, N), dtype=np.int64)
    for i in range(K):
        for j in range(K):
            idx = bytes([i, j]) if transposed else bytes([j, i])
            a[i, j] = sample_uniform(keccak.Shake128(rho + idx), KYBER)
    return a


def _noise_vec(seed: bytes, eta: int, first_nonce: int, count: int = K) -> np.ndarray:
    return np.stack([sample_cbd(_prf(seed, first_nonce + i, eta), eta, KYBER) for i in range(count)])


def _decode_polyvec(data: bytes) -> np.ndarray:
    return unpack_bits(data, 12, K * N).reshape(K, N)


# -- IND-CPA core -----------------------------------------------------------

def _cpa_keygen(d: bytes) -> tuple[bytes, bytes]:
    rho, sigma = _g(d)
    a_hat = gen_matrix(rho)
    s_hat = ntt(_noise_vec(sigma, ETA1, 0), KYBER)
    e_hat = ntt(_noise_vec(sigma, ETA1, K), KYBER)
    t_hat = (matvec(a_hat, s_hat, KYBER) + e_hat) % Q
    return pack_bits(t_hat, 12) + rho, pack_bits(s_hat, 12)


def _cpa_encrypt(pk: bytes, m: bytes, coins: bytes) -> bytes:
    t_hat = _decode_polyvec(pk[:POLYVEC_BYTES])
    rho = pk[POLYVEC_BYTES:]
    at_hat = gen_matrix(rho, transposed=True)
    r_hat = ntt(_noise_vec(coins, ETA1, 0), KYBER)
    e1 = _noise_vec(coins, ETA2, K)
    e2 = sample_cbd(_prf(coins, 2 * K, ETA2), ETA2, KYBER)
    u = (intt(matvec(at_hat, r_hat, KYBER), KYBER) + e1) % Q
    mu = decompress(unpack_bits(m, 1, N), 1)
    v = (intt(dot(t_hat, r_hat, KYBER), KYBER) + e2 + mu) % Q
    return pack_bits(compress(u, DU), DU) + pack_bits(compress(v, DV), DV)


def _cpa_decrypt(sk_pke: bytes, ct: bytes) -> bytes:
    split = K * N * DU // 8
    u = decompress(unpack_bits(ct[:split], DU, K * N).reshape(K, N), DU)
    v = decompress(unpack_bits(ct[split:], DV, N), DV)
    s_hat = _decode_polyvec(sk_pke)
    w = (v - intt(dot(s_hat, ntt(u, KYBER), KYBER), KYBER)) % Q
    return pack_bits(compress(w, 1), 1)


# -- CCA KEM ----------------------------------------------------------------

def keygen(seed_d: bytes, seed_z: bytes) -> tuple[bytes, bytes]:
    """Deterministic key pair from the two 32-byte seeds."""
    if len(seed_d) != SYMBYTES or len(seed_z) != SYMBYTES:
        raise KyberError("keygen seeds are 32 bytes each")
    pk, sk_pke = _cpa_keygen(seed_d)
    return pk, sk_pke + pk + _h(pk) + seed_z


def encapsulate(pk: bytes, seed_m: bytes) -> tuple[bytes, bytes]:
    """Return (ciphertext, shared_secret)."""
    if len(pk) != PUBLIC_KEY_BYTES:
        raise KyberError(f"public key must be {PUBLIC_KEY_BYTES} bytes, got {len(pk)}")
    if len(seed_m) != SYMBYTES:
        raise KyberError("encapsulation seed is 32 bytes")
    m = _h(seed_m)
    k_bar, coins = _g(m + _h(pk))
    ct = _cpa_encrypt(pk, m, coins)
    return ct, _kdf(k_bar + _h(ct))


def decapsulate(sk: bytes, ct: bytes) -> bytes:
    """Recover the shared secret; invalid ciphertexts yield the implicit-rejection key."""
    if len(sk) != SECRET_KEY_BYTES:
        raise KyberError(f"secret key must be {SECRET_KEY_BYTES} bytes, got {len(sk)}")
    if len(ct) != CIPHERTEXT_BYTES:
        raise KyberError(f"ciphertext must be {CIPHERTEXT_BYTES} bytes, got {len(ct)}")
    sk_pke = sk[:POLYVEC_BYTES]
    pk = sk[POLYVEC_BYTES:POLYVEC_BYTES + PUBLIC_KEY_BYTES]
    pk_hash = sk[-2 * SYMBYTES:-SYMBYTES]
    z = sk[-SYMBYTES:]
    m = _cpa_decrypt(sk_pke, ct)
    k_bar, coins = _g(m + pk_hash)
    ct_check = _cpa_encrypt(pk, m, coins)
    ok = hmac.compare_digest(ct, ct_check)
    # both candidates are always computed; selection does not branch on secrets
    good = _kdf(k_bar + _h(ct))
    bad = _kdf(z + _h(ct))
    mask = -int(ok) & 0xFF
    return bytes((g & mask) | (b & ~mask & 0xFF) for g, b in zip(good, bad))


def public_key_from_secret(sk: bytes) -> bytes:
    if len(sk) != SECRET_KEY_BYTES:
        raise KyberError(f"secret key must be {SECRET_KEY_BYTES} bytes")
    return sk[POLYVEC_BYTES:POLYVEC_BYTES + PUBLIC_KEY_BYTES]


# -- hybrid data encryption -------------------------------------------------

def _xor(a: bytes, b: bytes) -> bytes:
    return (int.from_bytes(a, "little") ^ int.from_bytes(b, "little")).to_bytes(len(a), "little")


def data_encrypt(pk: bytes, plaintext: bytes, rng: Callable[[int], bytes] = os.urandom) -> bytes:
    """Encrypt up to MAX_DATA bytes under a Kyber public key.

    ``rng`` supplies the 32-byte encapsulation seed followed by the 16-byte nonce.
    """
    if len(plaintext) > MAX_DATA:
        raise KyberError(f"plaintext exceeds {MAX_DATA} bytes")
    ct, ss = encapsulate(pk, rng(SYMBYTES))
    nonce = rng(NONCE_BYTES)
    pad = keccak.shake256(ss + nonce, len(plaintext))
    tag = keccak.sha3_256(ss + plaintext)
    return ct + nonce + _xor(plaintext, pad) + tag


def data_decrypt(sk: bytes, blob: bytes) -> bytes:
    """Inverse of :func:`data_encrypt`; raises IntegrityError on any tampering."""
    if len(blob) < HYBRID_OVERHEAD:
        raise KyberError(f"hybrid ciphertext shorter than {HYBRID_OVERHEAD} bytes")
    if len(blob) > HYBRID_OVERHEAD + MAX_DATA:
        raise KyberError("hybrid ciphertext longer than the data limit")
    ct = blob[:CIPHERTEXT_BYTES]
    nonce = blob[CIPHERTEXT_BYTES:CIPHERTEXT_BYTES + NONCE_BYTES]
    body = blob[CIPHERTEXT_BYTES + NONCE_BYTES:-TAG_BYTES]
    tag = blob[-TAG_BYTES:]
    ss = decapsulate(sk, ct)
    plaintext = _xor(body, keccak.shake256(ss + nonce, len(body)))
    if not hmac.compare_digest(tag, keccak.sha3_256(ss + plaintext)):
        raise IntegrityError("hybrid ciphertext integrity check failed")
    return plaintext
