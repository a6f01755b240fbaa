"""TPM random number generator.

Production mode reads the OS entropy pool.  Test mode squeezes a SHAKE256
stream keyed by a fixed seed, so a whole command sequence (and therefore a
wire transcript) is reproducible.
"""

from __future__ import annotations

import os

from .. import keccak

MAX_REQUEST = 1024


class TpmRng:
    def __init__(self, seed: bytes | None = None):
        self.test_mode = seed is not None
        self._xof = keccak.Shake256(b"qtpm-rng" + seed) if seed is not None else None

    def __call__(self, count: int) -> bytes:
        if count < 0 or count > MAX_REQUEST:
            raise ValueError(f"RNG request must be within 0..{MAX_REQUEST} bytes")
        if count == 0:
            return b""
        if self._xof is None:
            return os.urandom(count)
        return self._xof.read(count)

    rng_bytes = __call__
