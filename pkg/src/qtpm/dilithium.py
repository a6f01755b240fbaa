"""Dilithium level III (round 3.1), deterministic signing.

Byte layouts follow the round-3.1 reference:

    public key = rho || pack10(t1)                                    1952 bytes
    secret key = rho || key || tr || pack4(s1) || pack4(s2) || pack13(t0)  4000 bytes
    signature  = c_tilde || pack20(z) || hint                          3293 bytes
"""

from __future__ import annotations

import numpy as np

from . import keccak
from .ring import DILITHIUM, centered, intt, matvec, ntt, pack_bits, pointwise, sample_uniform, unpack_bits

N = DILITHIUM.n
Q = DILITHIUM.q
K = 6
L = 5
ETA = 4
TAU = 49
BETA = TAU * ETA  # 196
OMEGA = 55
GAMMA1 = 1 << 19
GAMMA2 = (Q - 1) // 32
ALPHA = 2 * GAMMA2
D = 13

SEEDBYTES = 32
CRHBYTES = 64
POLYT1_BYTES = N * 10 // 8
POLYT0_BYTES = N * 13 // 8
POLYETA_BYTES = N * 4 // 8
POLYZ_BYTES = N * 20 // 8
POLYW1_BYTES = N * 4 // 8

PUBLIC_KEY_BYTES = SEEDBYTES + K * POLYT1_BYTES
SECRET_KEY_BYTES = 3 * SEEDBYTES + (L + K) * POLYETA_BYTES + K * POLYT0_BYTES
SIGNATURE_BYTES = SEEDBYTES + L * POLYZ_BYTES + OMEGA + K

MAX_SIGN_ATTEMPTS = 1000


class DilithiumError(ValueError):
    pass


# -- rounding helpers ---------------------------------------------------------

def _check_range(r: np.ndarray) -> None:
    if r.size and (r.min() < 0 or r.max() >= Q):
        raise DilithiumError("rounding helpers take inputs in [0, q)")


def power2round(r):
    """Split r = r1 * 2**13 + r0 with r0 in (-2**12, 2**12]."""
    r = np.asarray(r, dtype=np.int64)
    _check_range(r)
    r1 = (r + (1 << (D - 1)) - 1) >> D
    return r1, r - (r1 << D)


def decompose(r):
    """High/low split with alpha = 2*gamma2; r0 centered mod alpha."""
    r = np.asarray(r, dtype=np.int64)
    _check_range(r)
    r0 = r % ALPHA
    r0 = np.where(r0 > ALPHA // 2, r0 - ALPHA, r0)
    wrap = (r - r0) == Q - 1
    r1 = np.where(wrap, 0, (r - r0) // ALPHA)
    r0 = np.where(wrap, r0 - 1, r0)
    return r1, r0


def high_bits(r):
    return decompose(r)[0]


def low_bits(r):
    return decompose(r)[1]


def make_hint(z, r):
    """1 where adding z to r changes the high bits."""
    r = np.asarray(r, dtype=np.int64)
    return (high_bits(r) != high_bits((r + np.asarray(z, dtype=np.int64)) % Q)).astype(np.int64)


def use_hint(h, r):
    """Recover HighBits(r + z) from r and the hint for z."""
    r1, r0 = decompose(r)
    m = (Q - 1) // ALPHA
    adj = np.where(r0 > 0, (r1 + 1) % m, (r1 - 1) % m)
    return np.where(np.asarray(h) == 1, adj, r1)


def _norm_exceeds(x, bound: int) -> bool:
    return bool((np.abs(centered(x, Q)) >= bound).any())


# -- sampling -------------------------------------------------------------------

def expand_a(rho: bytes) -> np.ndarray:
    a = np.empty((K, L, N), dtype=np.int64)
    for i in range(K):
        for j in range(L):
            a[i, j] = sample_uniform(keccak.Shake128(rho + bytes([j, i])), DILITHIUM)
    return a


def _uniform_eta(seed: bytes, nonce: int) -> np.ndarray:
    xof = keccak.Shake256(seed + nonce.to_bytes(2, "little"))
    out = np.empty(N, dtype=np.int64)
    filled = 0
    while filled < N:
        raw = np.frombuffer(xof.read(136), dtype=np.uint8).astype(np.int64)
        cand = np.stack([raw & 0x0F, raw >> 4], axis=1).reshape(-1)
        cand = cand[cand < 9]
        take = min(N - filled, len(cand))
        out[filled:filled + take] = ETA - cand[:take]
        filled += take
    return out


def expand_s(rho_prime: bytes) -> tuple[np.ndarray, np.ndarray]:
    s1 = np.stack([_uniform_eta(rho_prime, i) for i in range(L)])
    s2 = np.stack([_uniform_eta(rho_prime, L + i) for i in range(K)])
    return s1, s2


def expand_mask(rho_prime: bytes, kappa: int) -> np.ndarray:
    rows = []
    for i in range(L):
        nonce = L * kappa + i
        buf = keccak.shake256(rho_prime + nonce.to_bytes(2, "little"), POLYZ_BYTES)
        rows.append(GAMMA1 - unpack_bits(buf, 20, N))
    return np.stack(rows)


def sample_in_ball(c_tilde: bytes) -> np.ndarray:
    """Challenge polynomial with TAU coefficients in {-1, +1}."""
    xof = keccak.Shake256(c_tilde)
    signs = int.from_bytes(xof.read(8), "little")
    c = np.zeros(N, dtype=np.int64)
    for i in range(N - TAU, N):
        while True:
            b = xof.read(1)[0]
            if b <= i:
                break
        c[i] = c[b]
        c[b] = 1 - 2 * (signs & 1)
        signs >>= 1
    return c


# -- packing ----------------------------------------------------------------------

def _pack_w1(w1) -> bytes:
    return pack_bits(w1, 4)


def pack_hint(h: np.ndarray) -> bytes:
    out = bytearray(OMEGA + K)
    idx = 0
    for i in range(K):
        for j in np.flatnonzero(h[i]):
            out[idx] = int(j)
            idx += 1
        out[OMEGA + i] = idx
    return bytes(out)


def unpack_hint(data: bytes):
    """Decode the hint vector, or None when the encoding is malformed."""
    h = np.zeros((K, N), dtype=np.int64)
    idx = 0
    for i in range(K):
        end = data[OMEGA + i]
        if end < idx or end > OMEGA:
            return None
        for j in range(idx, end):
            if j > idx and data[j] <= data[j - 1]:
                return None
            h[i, data[j]] = 1
        idx = end
    if any(data[idx:OMEGA]):
        return None
    return h


def unpack_public_key(pk: bytes) -> tuple[bytes, np.ndarray]:
    if len(pk) != PUBLIC_KEY_BYTES:
        raise DilithiumError(f"public key must be {PUBLIC_KEY_BYTES} bytes, got {len(pk)}")
    return pk[:SEEDBYTES], unpack_bits(pk[SEEDBYTES:], 10, K * N).reshape(K, N)


def unpack_secret_key(sk: bytes):
    if len(sk) != SECRET_KEY_BYTES:
        raise DilithiumError(f"secret key must be {SECRET_KEY_BYTES} bytes, got {len(sk)}")
    rho, key, tr = sk[:32], sk[32:64], sk[64:96]
    off = 96
    s1 = ETA - unpack_bits(sk[off:off + L * POLYETA_BYTES], 4, L * N).reshape(L, N)
    off += L * POLYETA_BYTES
    s2 = ETA - unpack_bits(sk[off:off + K * POLYETA_BYTES], 4, K * N).reshape(K, N)
    off += K * POLYETA_BYTES
    t0 = (1 << (D - 1)) - unpack_bits(sk[off:], 13, K * N).reshape(K, N)
    return rho, key, tr, s1, s2, t0


# -- scheme -------------------------------------------------------------------------

def keygen(seed: bytes) -> tuple[bytes, bytes]:
    if len(seed) != SEEDBYTES:
        raise DilithiumError("keygen seed is 32 bytes")
    expanded = keccak.shake256(seed, 2 * SEEDBYTES + CRHBYTES)
    rho, rho_prime, key = expanded[:32], expanded[32:96], expanded[96:]
    a_hat = expand_a(rho)
    s1, s2 = expand_s(rho_prime)
    t = (intt(matvec(a_hat, ntt(s1, DILITHIUM), DILITHIUM), DILITHIUM) + s2) % Q
    t1, t0 = power2round(t)
    pk = rho + pack_bits(t1, 10)
    tr = keccak.shake256(pk, SEEDBYTES)
    sk = (
        rho + key + tr
        + pack_bits(ETA - s1, 4)
        + pack_bits(ETA - s2, 4)
        + pack_bits((1 << (D - 1)) - t0, 13)
    )
    return pk, sk


def sign(sk: bytes, message: bytes) -> bytes:
    rho, key, tr, s1, s2, t0 = unpack_secret_key(sk)
    a_hat = expand_a(rho)
    mu = keccak.shake256(tr + message, CRHBYTES)
    rho_prime = keccak.shake256(key + mu, CRHBYTES)
    s1_hat = ntt(s1, DILITHIUM)
    s2_hat = ntt(s2, DILITHIUM)
    t0_hat = ntt(t0, DILITHIUM)

    for kappa in range(MAX_SIGN_ATTEMPTS):
        y = expand_mask(rho_prime, kappa)
        w = intt(matvec(a_hat, ntt(y, DILITHIUM), DILITHIUM), DILITHIUM)
        w1, w0 = decompose(w)
        c_tilde = keccak.shake256(mu + _pack_w1(w1), SEEDBYTES)
        c_hat = ntt(sample_in_ball(c_tilde), DILITHIUM)

        z = (y + intt(pointwise(s1_hat, c_hat, DILITHIUM), DILITHIUM)) % Q
        if _norm_exceeds(z, GAMMA1 - BETA):
            continue
        cs2 = intt(pointwise(s2_hat, c_hat, DILITHIUM), DILITHIUM)
        r0 = centered(w0 - cs2, Q)
        if _norm_exceeds(r0, GAMMA2 - BETA):
            continue
        ct0 = intt(pointwise(t0_hat, c_hat, DILITHIUM), DILITHIUM)
        if _norm_exceeds(ct0, GAMMA2):
            continue
        h = make_hint(-ct0 % Q, (w - cs2 + ct0) % Q)
        if h.sum() > OMEGA:
            continue
        return c_tilde + pack_bits(GAMMA1 - centered(z, Q), 20) + pack_hint(h)
    raise RuntimeError("signing did not terminate within the attempt cap")


def verify(pk: bytes, message: bytes, sig: bytes) -> bool:
    """True iff ``sig`` is a valid signature; malformed inputs are rejected, never raised."""
    if len(pk) != PUBLIC_KEY_BYTES or len(sig) != SIGNATURE_BYTES:
        return False
    rho, t1 = unpack_public_key(pk)
    c_tilde = sig[:SEEDBYTES]
    z = GAMMA1 - unpack_bits(sig[SEEDBYTES:SEEDBYTES + L * POLYZ_BYTES], 20, L * N).reshape(L, N)
    h = unpack_hint(sig[SEEDBYTES + L * POLYZ_BYTES:])
    if h is None or _norm_exceeds(z, GAMMA1 - BETA):
        return False
    mu = keccak.shake256(keccak.shake256(pk, SEEDBYTES) + message, CRHBYTES)
    c_hat = ntt(sample_in_ball(c_tilde), DILITHIUM)
    a_hat = expand_a(rho)
    az = matvec(a_hat, ntt(z, DILITHIUM), DILITHIUM)
    ct1 = pointwise(ntt(t1 << D, DILITHIUM), c_hat, DILITHIUM)
    w_approx = intt(az - ct1, DILITHIUM)
    w1 = use_hint(h, w_approx)
    return keccak.shake256(mu + _pack_w1(w1), SEEDBYTES) == c_tilde
