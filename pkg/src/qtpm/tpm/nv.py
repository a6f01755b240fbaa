"""The emulated 64 kB non-volatile region.

Layout (all offsets fixed)::

    0      magic "QTPMNV01"
    8      hierarchy primary seed (32 bytes)
    40     reset counter, u64 big-endian
    1024   eight key slots of 4096 bytes: u16 length || blob

The backing file is the raw 65536-byte image and is rewritten on every
mutation.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

NV_SIZE = 65536
MAGIC = b"QTPMNV01"
SEED_OFFSET = 8
SEED_BYTES = 32
COUNTER_OFFSET = 40
SLOT_OFFSET = 1024
SLOT_SIZE = 4096
SLOT_COUNT = 8


class NvSpaceError(Exception):
    """Access outside the 64 kB region or a slot too small for the blob."""


class NvStore:
    def __init__(self, path: str | os.PathLike | None = None):
        self.path = Path(path) if path is not None else None
        self._mem = bytearray(NV_SIZE)

    @property
    def capacity(self) -> int:
        return len(self._mem)

    # raw access -------------------------------------------------------------

    def read(self, offset: int, size: int) -> bytes:
        if offset < 0 or size < 0 or offset + size > NV_SIZE:
            raise NvSpaceError(f"read [{offset}, {offset + size}) outside NV")
        return bytes(self._mem[offset:offset + size])

    def write(self, offset: int, data: bytes) -> None:
        if offset < 0 or offset + len(data) > NV_SIZE:
            raise NvSpaceError(f"write [{offset}, {offset + len(data)}) outside NV")
        self._mem[offset:offset + len(data)] = data
        self.flush()

    def image(self) -> bytes:
        return bytes(self._mem)

    # persistence --------------------------------------------------------------

    def flush(self) -> None:
        if self.path is None:
            return
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        tmp.write_bytes(self._mem)
        os.replace(tmp, self.path)

    def load(self) -> bool:
        """Read the backing file; False when there is nothing valid to load."""
        if self.path is None or not self.path.exists():
            return False
        data = self.path.read_bytes()
        if len(data) != NV_SIZE:
            raise NvSpaceError(f"NV image must be {NV_SIZE} bytes, found {len(data)}")
        self._mem[:] = data
        return self.formatted

    @property
    def formatted(self) -> bool:
        return self._mem[:len(MAGIC)] == MAGIC

    def format(self, primary_seed: bytes) -> None:
        if len(primary_seed) != SEED_BYTES:
            raise ValueError("primary seed is 32 bytes")
        self._mem[:] = bytes(NV_SIZE)
        self._mem[:len(MAGIC)] = MAGIC
        self._mem[SEED_OFFSET:SEED_OFFSET + SEED_BYTES] = primary_seed
        self.flush()

    # structured fields -----------------------------------------------------------

    @property
    def primary_seed(self) -> bytes:
        return self.read(SEED_OFFSET, SEED_BYTES)

    @property
    def reset_count(self) -> int:
        return struct.unpack(">Q", self.read(COUNTER_OFFSET, 8))[0]

    def increment_reset_count(self) -> int:
        count = self.reset_count + 1
        self.write(COUNTER_OFFSET, struct.pack(">Q", count))
        return count

    def write_slot(self, index: int, blob: bytes) -> None:
        if not 0 <= index < SLOT_COUNT:
            raise NvSpaceError(f"slot {index} does not exist")
        if len(blob) > SLOT_SIZE - 2:
            raise NvSpaceError(f"blob of {len(blob)} bytes exceeds slot size")
        record = struct.pack(">H", len(blob)) + blob
        self.write(SLOT_OFFSET + index * SLOT_SIZE, record + bytes(SLOT_SIZE - len(record)))

    def read_slot(self, index: int) -> bytes | None:
        if not 0 <= index < SLOT_COUNT:
            raise NvSpaceError(f"slot {index} does not exist")
        base = SLOT_OFFSET + index * SLOT_SIZE
        size = struct.unpack(">H", self.read(base, 2))[0]
        return self.read(base + 2, size) if size else None

    def clear_slot(self, index: int) -> None:
        self.write_slot(index, b"")
