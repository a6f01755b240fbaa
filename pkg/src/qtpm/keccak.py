"""Keccak-f[1600] and the FIPS 202 functions built on it.

Only the byte-oriented sponge is provided: SHA3-256/512 and SHAKE128/256
with the standard domain-separation suffixes.  The sponge supports
incremental absorb and squeeze so long expansions can be streamed.
"""

from __future__ import annotations

import struct

MASK64 = (1 << 64) - 1
ROUNDS = 24

ROUND_CONSTANTS = (
    0x0000000000000001, 0x0000000000008082, 0x800000000000808A,
    0x8000000080008000, 0x000000000000808B, 0x0000000080000001,
    0x8000000080008081, 0x8000000000008009, 0x000000000000008A,
    0x0000000000000088, 0x0000000080008009, 0x000000008000000A,
    0x000000008000808B, 0x800000000000008B, 0x8000000000008089,
    0x8000000000008003, 0x8000000000008002, 0x8000000000000080,
    0x000000000000800A, 0x800000008000000A, 0x8000000080008081,
    0x8000000000008080, 0x0000000080000001, 0x8000000080008008,
)

# rotation offsets indexed by lane x + 5*y
ROTATIONS = (
    0, 1, 62, 28, 27,
    36, 44, 6, 55, 20,
    3, 10, 43, 25, 39,
    41, 45, 15, 21, 8,
    18, 2, 61, 56, 14,
)

SHA3_SUFFIX = 0x06
SHAKE_SUFFIX = 0x1F


def keccak_f1600(lanes: list[int]) -> None:
    """Apply the 24-round permutation to 25 little-endian lanes in place.

    Rounds are unrolled over named locals; theta's column parities are
    folded into the combined rho/pi step and chi works row by row.
    """
    M = MASK64
    a0, a1, a2, a3, a4, a5, a6, a7, a8, a9, a10, a11, a12, a13, a14, a15, a16, a17, a18, a19, a20, a21, a22, a23, a24 = lanes
    for rc in ROUND_CONSTANTS:
        c0 = a0 ^ a5 ^ a10 ^ a15 ^ a20
        c1 = a1 ^ a6 ^ a11 ^ a16 ^ a21
        c2 = a2 ^ a7 ^ a12 ^ a17 ^ a22
        c3 = a3 ^ a8 ^ a13 ^ a18 ^ a23
        c4 = a4 ^ a9 ^ a14 ^ a19 ^ a24
        d0 = c4 ^ (((c1 << 1) | (c1 >> 63)) & M)
        d1 = c0 ^ (((c2 << 1) | (c2 >> 63)) & M)
        d2 = c1 ^ (((c3 << 1) | (c3 >> 63)) & M)
        d3 = c2 ^ (((c4 << 1) | (c4 >> 63)) & M)
        d4 = c3 ^ (((c0 << 1) | (c0 >> 63)) & M)
        b0 = (a0 ^ d0)
        t = (a1 ^ d1); b10 = ((t << 1) | (t >> 63)) & M
        t = (a2 ^ d2); b20 = ((t << 62) | (t >> 2)) & M
        t = (a3 ^ d3); b5 = ((t << 28) | (t >> 36)) & M
        t = (a4 ^ d4); b15 = ((t << 27) | (t >> 37)) & M
        t = (a5 ^ d0); b16 = ((t << 36) | (t >> 28)) & M
        t = (a6 ^ d1); b1 = ((t << 44) | (t >> 20)) & M
        t = (a7 ^ d2); b11 = ((t << 6) | (t >> 58)) & M
        t = (a8 ^ d3); b21 = ((t << 55) | (t >> 9)) & M
        t = (a9 ^ d4); b6 = ((t << 20) | (t >> 44)) & M
        t = (a10 ^ d0); b7 = ((t << 3) | (t >> 61)) & M
        t = (a11 ^ d1); b17 = ((t << 10) | (t >> 54)) & M
        t = (a12 ^ d2); b2 = ((t << 43) | (t >> 21)) & M
        t = (a13 ^ d3); b12 = ((t << 25) | (t >> 39)) & M
        t = (a14 ^ d4); b22 = ((t << 39) | (t >> 25)) & M
        t = (a15 ^ d0); b23 = ((t << 41) | (t >> 23)) & M
        t = (a16 ^ d1); b8 = ((t << 45) | (t >> 19)) & M
        t = (a17 ^ d2); b18 = ((t << 15) | (t >> 49)) & M
        t = (a18 ^ d3); b3 = ((t << 21) | (t >> 43)) & M
        t = (a19 ^ d4); b13 = ((t << 8) | (t >> 56)) & M
        t = (a20 ^ d0); b14 = ((t << 18) | (t >> 46)) & M
        t = (a21 ^ d1); b24 = ((t << 2) | (t >> 62)) & M
        t = (a22 ^ d2); b9 = ((t << 61) | (t >> 3)) & M
        t = (a23 ^ d3); b19 = ((t << 56) | (t >> 8)) & M
        t = (a24 ^ d4); b4 = ((t << 14) | (t >> 50)) & M
        a0 = b0 ^ (~b1 & b2)
        a1 = b1 ^ (~b2 & b3)
        a2 = b2 ^ (~b3 & b4)
        a3 = b3 ^ (~b4 & b0)
        a4 = b4 ^ (~b0 & b1)
        a5 = b5 ^ (~b6 & b7)
        a6 = b6 ^ (~b7 & b8)
        a7 = b7 ^ (~b8 & b9)
        a8 = b8 ^ (~b9 & b5)
        a9 = b9 ^ (~b5 & b6)
        a10 = b10 ^ (~b11 & b12)
        a11 = b11 ^ (~b12 & b13)
        a12 = b12 ^ (~b13 & b14)
        a13 = b13 ^ (~b14 & b10)
        a14 = b14 ^ (~b10 & b11)
        a15 = b15 ^ (~b16 & b17)
        a16 = b16 ^ (~b17 & b18)
        a17 = b17 ^ (~b18 & b19)
        a18 = b18 ^ (~b19 & b15)
        a19 = b19 ^ (~b15 & b16)
        a20 = b20 ^ (~b21 & b22)
        a21 = b21 ^ (~b22 & b23)
        a22 = b22 ^ (~b23 & b24)
        a23 = b23 ^ (~b24 & b20)
        a24 = b24 ^ (~b20 & b21)
        a0 ^= rc
    lanes[:] = a0, a1, a2, a3, a4, a5, a6, a7, a8, a9, a10, a11, a12, a13, a14, a15, a16, a17, a18, a19, a20, a21, a22, a23, a24


class KeccakState:
    """The 1600-bit state as 25 lanes, lane index x + 5*y."""

    __slots__ = ("lanes",)

    def __init__(self, lanes=None):
        if lanes is None:
            self.lanes = [0] * 25
        else:
            if len(lanes) != 25:
                raise ValueError("Keccak state has exactly 25 lanes")
            self.lanes = [int(v) & MASK64 for v in lanes]

    def permute(self) -> "KeccakState":
        keccak_f1600(self.lanes)
        return self

    def copy(self) -> "KeccakState":
        return KeccakState(self.lanes)

    def to_bytes(self) -> bytes:
        return struct.pack("<25Q", *self.lanes)

    @classmethod
    def from_bytes(cls, data: bytes) -> "KeccakState":
        if len(data) != 200:
            raise ValueError("Keccak state is 200 bytes")
        return cls(struct.unpack("<25Q", data))

    def __eq__(self, other):
        return isinstance(other, KeccakState) and self.lanes == other.lanes


class Sponge:
    """Keccak sponge with incremental absorb and squeeze.

    Once the first squeeze happens the padding is applied and further
    absorbs are rejected.
    """

    __slots__ = ("rate", "suffix", "_state", "_buf", "_out", "_pos", "_squeezing")

    def __init__(self, rate: int, suffix: int, data: bytes = b""):
        if rate <= 0 or rate >= 200 or rate % 8:
            raise ValueError("rate must be a positive multiple of 8 below 200")
        self.rate = rate
        self.suffix = suffix
        self._state = [0] * 25
        self._buf = bytearray()
        self._out = b""  # current output block, always `rate` bytes once squeezing
        self._pos = 0
        self._squeezing = False
        if data:
            self.absorb(data)

    def _absorb_block(self, block) -> None:
        state = self._state
        for i, lane in enumerate(struct.unpack_from("<%dQ" % (self.rate // 8), block)):
            state[i] ^= lane
        keccak_f1600(state)

    def absorb(self, data: bytes) -> "Sponge":
        if self._squeezing:
            raise RuntimeError("cannot absorb after squeezing has started")
        buf = self._buf
        buf += data
        rate = self.rate
        if len(buf) >= rate:
            view = memoryview(buf)
            n = len(buf) - len(buf) % rate
            for off in range(0, n, rate):
                self._absorb_block(view[off:off + rate])
            view.release()
            del buf[:n]
        return self

    update = absorb

    def _finalize(self) -> None:
        pad = bytearray(self.rate - len(self._buf))
        pad[0] ^= self.suffix
        pad[-1] ^= 0x80
        self._absorb_block(bytes(self._buf) + bytes(pad))
        self._buf = bytearray()
        self._squeezing = True
        self._out = struct.pack("<%dQ" % (self.rate // 8), *self._state[: self.rate // 8])
        self._pos = 0

    def squeeze(self, n: int) -> bytes:
        if n < 0:
            raise ValueError("output length must be non-negative")
        if not self._squeezing:
            self._finalize()
        chunks = []
        rate = self.rate
        while n > 0:
            if self._pos == rate:
                keccak_f1600(self._state)
                self._out = struct.pack("<%dQ" % (rate // 8), *self._state[: rate // 8])
                self._pos = 0
            take = self._out[self._pos:self._pos + n]
            self._pos += len(take)
            chunks.append(take)
            n -= len(take)
        return b"".join(chunks)

    read = squeeze

    def copy(self) -> "Sponge":
        other = Sponge.__new__(Sponge)
        other.rate = self.rate
        other.suffix = self.suffix
        other._state = list(self._state)
        other._buf = bytearray(self._buf)
        other._out = self._out
        other._pos = self._pos
        other._squeezing = self._squeezing
        return other


def Shake128(data: bytes = b"") -> Sponge:
    return Sponge(168, SHAKE_SUFFIX, data)


def Shake256(data: bytes = b"") -> Sponge:
    return Sponge(136, SHAKE_SUFFIX, data)


def sha3_256(message: bytes) -> bytes:
    return Sponge(136, SHA3_SUFFIX, message).squeeze(32)


def sha3_512(message: bytes) -> bytes:
    return Sponge(72, SHA3_SUFFIX, message).squeeze(64)


def shake128(message: bytes, out_len: int) -> bytes:
    return Shake128(message).squeeze(out_len)


def shake256(message: bytes, out_len: int) -> bytes:
    return Shake256(message).squeeze(out_len)


def shake(variant: int, message: bytes, out_len: int) -> bytes:
    """SHAKE128 or SHAKE256 selected by ``variant``."""
    if variant == 128:
        return shake128(message, out_len)
    if variant == 256:
        return shake256(message, out_len)
    raise ValueError(f"unknown SHAKE variant {variant}")
