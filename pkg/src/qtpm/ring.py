"""Arithmetic in Z_q[x]/(x^n + 1) for the three lattice schemes.

Polynomials are int64 numpy arrays with coefficients in [0, q).  The
array-level functions (``ntt``, ``intt``, ``pointwise``) accept any
leading batch shape so a whole module vector or matrix row is transformed
in one call; ``Poly`` and ``PolyVec`` wrap them with parameter checking.

Twiddles follow the usual reference layout: ``zetas[k] = root**brv(k)``
consumed in Cooley-Tukey order by the forward transform, reversed within
each layer by the Gentleman-Sande inverse.  Kyber's modulus only admits a
7-layer transform, so its NTT domain holds 128 degree-1 residues that are
multiplied with a basecase product.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _bitrev(x: int, bits: int) -> int:
    return int(format(x, f"0{bits}b")[::-1], 2) if bits else 0


def _is_prime(q: int) -> bool:
    if q < 2:
        return False
    f = 2
    while f * f <= q:
        if q % f == 0:
            return False
        f += 1
    return True


def smallest_root_of_unity(q: int, order: int) -> int:
    """Smallest element of exact multiplicative order ``order`` mod ``q``."""
    if (q - 1) % order:
        raise ValueError(f"q={q} has no root of unity of order {order}")
    for g in range(2, q):
        if pow(g, order, q) == 1 and pow(g, order // 2, q) != 1:
            return g
    raise ValueError("no primitive root found")


@dataclass(frozen=True, eq=False)
class RingParams:
    """Ring dimension, modulus and the precomputed NTT tables.

    ``root`` has order 2n when the full negacyclic NTT exists and order n
    when the transform stops one layer early (Kyber).
    """

    name: str
    n: int
    q: int
    root: int
    ntt_layers: int
    uniform_bytes: int  # bytes consumed per rejection-sampling candidate
    uniform_mask: int
    zetas: np.ndarray = field(repr=False)
    gammas: np.ndarray = field(repr=False)
    n_inv: int = field(repr=False)

    @classmethod
    def build(cls, name: str, n: int, q: int, *, uniform_bytes: int, uniform_mask: int) -> "RingParams":
        if n & (n - 1) or n not in (256, 512):
            raise ValueError("n must be 256 or 512")
        if not _is_prime(q):
            raise ValueError(f"q={q} is not prime")
        log_n = n.bit_length() - 1
        if (q - 1) % (2 * n) == 0:
            layers = log_n
            root = smallest_root_of_unity(q, 2 * n)
        elif (q - 1) % n == 0:
            layers = log_n - 1
            root = smallest_root_of_unity(q, n)
        else:
            raise ValueError(f"q={q} does not support an NTT of dimension {n}")
        count = 1 << layers
        zetas = np.array([pow(root, _bitrev(k, layers), q) for k in range(count)], dtype=np.int64)
        if layers == log_n:
            gammas = np.zeros(0, dtype=np.int64)
        else:
            gammas = np.array(
                [pow(root, 2 * _bitrev(i, layers) + 1, q) for i in range(n // 2)],
                dtype=np.int64,
            )
        zetas.setflags(write=False)
        gammas.setflags(write=False)
        return cls(
            name=name, n=n, q=q, root=root, ntt_layers=layers,
            uniform_bytes=uniform_bytes, uniform_mask=uniform_mask,
            zetas=zetas, gammas=gammas, n_inv=pow(count, -1, q),
        )

    @property
    def complete(self) -> bool:
        return self.gammas.size == 0

    def __repr__(self):
        return f"RingParams({self.name}: n={self.n}, q={self.q}, root={self.root}, layers={self.ntt_layers})"


KYBER = RingParams.build("kyber", 256, 3329, uniform_bytes=3, uniform_mask=0xFFF)
DILITHIUM = RingParams.build("dilithium", 256, 8380417, uniform_bytes=3, uniform_mask=0x7FFFFF)
ROT = RingParams.build("rot", 512, 13313, uniform_bytes=2, uniform_mask=0x3FFF)

ALL_PARAMS = (KYBER, DILITHIUM, ROT)


class ParameterMismatch(ValueError):
    """Operands belong to different rings or have the wrong length."""


# -- array level ----------------------------------------------------------

def _check_len(x: np.ndarray, params: RingParams) -> None:
    if x.shape[-1] != params.n:
        raise ParameterMismatch(
            f"polynomial of length {x.shape[-1]} used with {params.name} (n={params.n})"
        )


def ntt(x, params: RingParams) -> np.ndarray:
    """Forward transform along the last axis; output in bit-reversed order."""
    q, n = params.q, params.n
    a = np.array(x, dtype=np.int64) % q
    _check_len(a, params)
    lead = a.shape[:-1]
    length = n // 2
    blocks = 1
    for _ in range(params.ntt_layers):
        v = a.reshape(lead + (blocks, 2, length))
        z = params.zetas[blocks:2 * blocks].reshape(blocks, 1)
        t = (v[..., 1, :] * z) % q
        lo = v[..., 0, :]
        v[..., 1, :] = (lo - t) % q
        v[..., 0, :] = (lo + t) % q
        blocks *= 2
        length //= 2
    return a


def intt(x, params: RingParams) -> np.ndarray:
    """Inverse of :func:`ntt`, including the division by 2**layers."""
    q, n = params.q, params.n
    a = np.array(x, dtype=np.int64) % q
    _check_len(a, params)
    lead = a.shape[:-1]
    blocks = 1 << (params.ntt_layers - 1)
    length = n // (2 * blocks)
    for _ in range(params.ntt_layers):
        v = a.reshape(lead + (blocks, 2, length))
        z = params.zetas[blocks:2 * blocks][::-1].reshape(blocks, 1)
        lo = v[..., 0, :].copy()
        hi = v[..., 1, :]
        v[..., 0, :] = (lo + hi) % q
        v[..., 1, :] = (z * (hi - lo)) % q
        blocks //= 2
        length *= 2
    return (a * params.n_inv) % q


def pointwise(a, b, params: RingParams) -> np.ndarray:
    """Product of two NTT-domain elements (broadcasting over batch axes)."""
    q = params.q
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    _check_len(a, params)
    _check_len(b, params)
    if params.complete:
        return (a * b) % q
    a0, a1 = a[..., 0::2], a[..., 1::2]
    b0, b1 = b[..., 0::2], b[..., 1::2]
    out = np.empty(np.broadcast_shapes(a.shape, b.shape), dtype=np.int64)
    out[..., 0::2] = (a0 * b0 + (a1 * b1 % q) * params.gammas) % q
    out[..., 1::2] = (a0 * b1 + a1 * b0) % q
    return out


def matvec(matrix, vec, params: RingParams) -> np.ndarray:
    """NTT-domain matrix (k, l, n) times vector (l, n) -> (k, n)."""
    prods = pointwise(matrix, np.asarray(vec)[None, :, :], params)
    return prods.sum(axis=-2) % params.q


def dot(u, v, params: RingParams) -> np.ndarray:
    """NTT-domain inner product of two (k, n) vectors -> (n,)."""
    return pointwise(u, v, params).sum(axis=0) % params.q


def centered(x, q: int) -> np.ndarray:
    """Representative in (-q/2, q/2]."""
    x = np.asarray(x, dtype=np.int64) % q
    return np.where(x > q // 2, x - q, x)


# -- packing --------------------------------------------------------------

def pack_bits(values, bits: int) -> bytes:
    """Little-endian bit packing of non-negative integers < 2**bits."""
    v = np.asarray(values, dtype=np.int64).reshape(-1)
    if v.size and (v.min() < 0 or v.max() >> bits):
        raise ValueError(f"value does not fit in {bits} bits")
    bit_matrix = ((v[:, None] >> np.arange(bits, dtype=np.int64)) & 1).astype(np.uint8)
    return np.packbits(bit_matrix.reshape(-1), bitorder="little").tobytes()


def unpack_bits(data: bytes, bits: int, count: int) -> np.ndarray:
    """Inverse of :func:`pack_bits`; reads exactly ``count`` values."""
    need = (count * bits + 7) // 8
    if len(data) < need:
        raise ValueError(f"need {need} bytes to unpack {count} {bits}-bit values, got {len(data)}")
    raw = np.unpackbits(np.frombuffer(bytes(data[:need]), dtype=np.uint8), bitorder="little")
    weights = np.left_shift(np.int64(1), np.arange(bits, dtype=np.int64))
    return raw[: count * bits].reshape(count, bits).astype(np.int64) @ weights


# -- sampling -------------------------------------------------------------

def uniform_candidates(buf: bytes, params: RingParams) -> np.ndarray:
    """Parse a byte string into rejection-sampling candidates (not yet filtered)."""
    raw = np.frombuffer(buf, dtype=np.uint8).astype(np.int64)
    if params.uniform_mask == 0xFFF:
        # two 12-bit candidates per three bytes
        t = raw[: len(raw) - len(raw) % 3].reshape(-1, 3)
        d1 = t[:, 0] | ((t[:, 1] & 0x0F) << 8)
        d2 = (t[:, 1] >> 4) | (t[:, 2] << 4)
        return np.stack([d1, d2], axis=1).reshape(-1)
    width = params.uniform_bytes
    t = raw[: len(raw) - len(raw) % width].reshape(-1, width)
    vals = np.zeros(len(t), dtype=np.int64)
    for i in range(width):
        vals |= t[:, i] << (8 * i)
    return vals & params.uniform_mask


def sample_uniform(xof_stream, params: RingParams) -> np.ndarray:
    """Rejection-sample n coefficients uniform in [0, q) from an XOF.

    ``xof_stream`` is any object with ``read(nbytes)``; it is squeezed in
    whole blocks until enough candidates were accepted.
    """
    q, n = params.q, params.n
    out = np.empty(n, dtype=np.int64)
    filled = 0
    chunk = 504
    while filled < n:
        cand = uniform_candidates(xof_stream.read(chunk), params)
        cand = cand[cand < q]
        take = min(n - filled, len(cand))
        out[filled:filled + take] = cand[:take]
        filled += take
        chunk = 168
    return out


def sample_cbd(data: bytes, eta: int, params: RingParams) -> np.ndarray:
    """Centered binomial noise: per coefficient, Hamming weight of eta bits minus the next eta bits."""
    n = params.n
    need = n * eta // 4
    if len(data) != need:
        raise ValueError(f"CBD with eta={eta} needs {need} bytes for n={n}, got {len(data)}")
    bits = np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8), bitorder="little")
    bits = bits.reshape(n, 2, eta).sum(axis=2, dtype=np.int64)
    return (bits[:, 0] - bits[:, 1]) % params.q


# -- value types ----------------------------------------------------------

class Poly:
    """A ring element with coefficients held in [0, q)."""

    __slots__ = ("coeffs", "params")

    def __init__(self, coeffs, params: RingParams):
        arr = np.array(coeffs, dtype=np.int64).reshape(-1)
        if arr.shape != (params.n,):
            raise ParameterMismatch(f"{params.name} polynomials have {params.n} coefficients, got {arr.size}")
        self.coeffs = arr % params.q
        self.params = params

    @classmethod
    def zero(cls, params: RingParams) -> "Poly":
        return cls(np.zeros(params.n, dtype=np.int64), params)

    @classmethod
    def monomial(cls, degree: int, params: RingParams, coeff: int = 1) -> "Poly":
        c = np.zeros(params.n, dtype=np.int64)
        c[degree] = coeff
        return cls(c, params)

    def _same(self, other: "Poly") -> None:
        if not isinstance(other, Poly) or other.params is not self.params:
            raise ParameterMismatch("operands belong to different rings")

    def __add__(self, other):
        return poly_add(self, other)

    def __sub__(self, other):
        return poly_sub(self, other)

    def __mul__(self, other):
        return poly_mul(self, other, self.params)

    def __neg__(self):
        return Poly(-self.coeffs, self.params)

    def __eq__(self, other):
        return (
            isinstance(other, Poly)
            and other.params is self.params
            and bool(np.array_equal(self.coeffs, other.coeffs))
        )

    def __repr__(self):
        head = ", ".join(str(int(c)) for c in self.coeffs[:4])
        return f"Poly<{self.params.name}>[{head}, ...]"

    def infinity_norm(self) -> int:
        return int(np.abs(centered(self.coeffs, self.params.q)).max())


class PolyVec:
    """k ring elements sharing one parameter set, stored as a (k, n) array."""

    __slots__ = ("coeffs", "params")

    def __init__(self, coeffs, params: RingParams):
        arr = np.array(coeffs, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[1] != params.n:
            raise ParameterMismatch(f"expected (k, {params.n}) array, got {arr.shape}")
        self.coeffs = arr % params.q
        self.params = params

    @classmethod
    def from_polys(cls, polys) -> "PolyVec":
        polys = list(polys)
        params = polys[0].params
        if any(p.params is not params for p in polys):
            raise ParameterMismatch("PolyVec elements must share parameters")
        return cls(np.stack([p.coeffs for p in polys]), params)

    def __len__(self):
        return self.coeffs.shape[0]

    def __getitem__(self, i) -> Poly:
        return Poly(self.coeffs[i], self.params)

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def __eq__(self, other):
        return (
            isinstance(other, PolyVec)
            and other.params is self.params
            and bool(np.array_equal(self.coeffs, other.coeffs))
        )


def _require(p: Poly, params: RingParams) -> None:
    if not isinstance(p, Poly) or p.params is not params:
        raise ParameterMismatch(f"polynomial does not belong to {params.name}")


def ntt_forward(p: Poly, params: RingParams) -> Poly:
    _require(p, params)
    return Poly(ntt(p.coeffs, params), params)


def ntt_inverse(p: Poly, params: RingParams) -> Poly:
    _require(p, params)
    return Poly(intt(p.coeffs, params), params)


def poly_mul(a: Poly, b: Poly, params: RingParams) -> Poly:
    """Negacyclic product computed through the NTT."""
    _require(a, params)
    _require(b, params)
    return Poly(intt(pointwise(ntt(a.coeffs, params), ntt(b.coeffs, params), params), params), params)


def poly_add(a: Poly, b: Poly) -> Poly:
    a._same(b)
    return Poly(a.coeffs + b.coeffs, a.params)


def poly_sub(a: Poly, b: Poly) -> Poly:
    a._same(b)
    return Poly(a.coeffs - b.coeffs, a.params)
