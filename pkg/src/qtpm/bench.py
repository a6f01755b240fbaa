"""Per-command latency harness.

Each operation is timed client-side around one full command round trip
(serialization, transport, dispatch, response), repeated ``iterations``
times after ``warmup`` untimed calls, and summarized by its median and
quartiles.  ROT party times are per-run sums: the receiver is MSG1 + MSG3,
the sender MSG2 + MSG4.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import keccak
from .tpm import constants as c
from .tpm.core import Tpm
from .transport import TcpTransport, start_server, stop_server
from .tss import TpmResponseError, TssClient

PAPER_STRING = "My super secret. Please don’t share.\n".encode("utf-8")
PAPER_DIGEST = keccak.sha3_256(PAPER_STRING)

ROWS = ("Key Creation", "Signature", "Verify Signature", "Encryption", "Decryption", "ROT Receiver", "ROT Sender")
COLUMNS = ("Kyber", "Dilithium", "ROT")
CSV_FIELDS = ("operation", "algorithm", "median_s", "p25_s", "p75_s", "min_s", "max_s")

# ROT per-party time relative to Kyber create+encrypt+decrypt
RATIO_BAND = (1.2, 4.0)


@dataclass(frozen=True)
class BenchSpec:
    operation: str
    algorithm: str
    iterations: int = 100
    warmup: int = 5

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.warmup < 0:
            raise ValueError("warmup must be non-negative")


@dataclass(frozen=True)
class BenchResult:
    operation: str
    algorithm: str
    median: float
    p25: float
    p75: float
    min: float
    max: float
    samples: tuple[float, ...] = ()

    def row(self) -> dict:
        return {
            "operation": self.operation,
            "algorithm": self.algorithm,
            "median_s": f"{self.median:.6f}",
            "p25_s": f"{self.p25:.6f}",
            "p75_s": f"{self.p75:.6f}",
            "min_s": f"{self.min:.6f}",
            "max_s": f"{self.max:.6f}",
        }


def summarize(operation: str, algorithm: str, samples: Iterable[float]) -> BenchResult:
    s = np.asarray(list(samples), dtype=float)
    if s.size == 0:
        raise ValueError("no samples")
    p25, median, p75 = np.percentile(s, [25, 50, 75])
    return BenchResult(operation, algorithm, float(median), float(p25), float(p75),
                       float(s.min()), float(s.max()), tuple(s.tolist()))


def _timed(fn: Callable[[], object]) -> float:
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def _measure(spec: BenchSpec, fn: Callable[[], object]) -> BenchResult:
    for _ in range(spec.warmup):
        fn()
    return summarize(spec.operation, spec.algorithm, (_timed(fn) for _ in range(spec.iterations)))


def default_specs(iterations: int = 100, warmup: int = 5) -> list[BenchSpec]:
    cells = [
        ("Key Creation", "Kyber"), ("Key Creation", "Dilithium"),
        ("Signature", "Dilithium"), ("Verify Signature", "Dilithium"),
        ("Encryption", "Kyber"), ("Decryption", "Kyber"),
        ("ROT Receiver", "ROT"), ("ROT Sender", "ROT"),
    ]
    return [BenchSpec(op, alg, iterations, warmup) for op, alg in cells]


def _ensure_started(client: TssClient) -> None:
    try:
        client.startup()
    except TpmResponseError as e:
        if e.rc != c.TPM_RC_INITIALIZE:
            raise


class _Fixture:
    """Keys and peer needed by the benchmarked commands."""

    def __init__(self, client: TssClient, peer: TssClient, auth: bytes):
        self.client = client
        self.peer = peer
        self.auth = auth
        self.handles: list[int] = []
        self.parent, _ = client.create_primary(c.TPM_ALG_KYBER768, auth)
        self.handles.append(self.parent)
        self.kyber = self._child(c.TPM_ALG_KYBER768)
        self.dilithium = self._child(c.TPM_ALG_DILITHIUM3)
        self.signature = client.sign(self.dilithium, PAPER_DIGEST, auth)
        self.blob = client.kyber_encrypt(self.kyber, PAPER_STRING)

    def _child(self, alg: int) -> int:
        key = self.client.create(self.parent, alg, self.auth, self.auth)
        handle = self.client.load(self.parent, key.private, key.public, self.auth)
        self.handles.append(handle)
        return handle

    def release(self) -> None:
        for handle in reversed(self.handles):
            try:
                self.client.flush_context(handle)
            except TpmResponseError:
                pass


def _rot_runs(spec: BenchSpec, client: TssClient, peer: TssClient) -> tuple[list[float], list[float]]:
    receiver, sender = [], []
    for i in range(spec.warmup + spec.iterations):
        choice = i & 1
        t0 = time.perf_counter()
        msg1 = client.rot_msg1(choice)
        t1 = time.perf_counter()
        msg2 = peer.rot_msg2(msg1)
        t2 = time.perf_counter()
        msg3, _ = client.rot_msg3(msg2)
        t3 = time.perf_counter()
        peer.rot_msg4(msg3)
        t4 = time.perf_counter()
        if i >= spec.warmup:
            receiver.append((t1 - t0) + (t3 - t2))
            sender.append((t2 - t1) + (t4 - t3))
    return receiver, sender


def run_bench(client: TssClient, specs: list[BenchSpec] | None = None, peer: TssClient | None = None,
              auth: bytes = b"bench", progress: Callable[[str], None] | None = None) -> list[BenchResult]:
    """Run every spec against ``client``.

    ROT needs a second TPM as the sender; without ``peer`` an in-process
    server is started on a free loopback port for the duration of the run.
    """
    specs = default_specs() if specs is None else specs
    own_server = None
    transport = None
    if peer is None and any(s.algorithm == "ROT" for s in specs):
        tpm = Tpm()
        own_server = start_server(tpm.dispatch)
        transport = TcpTransport("127.0.0.1", own_server.port)
        peer = TssClient(transport)
    try:
        _ensure_started(client)
        if peer is not None:
            _ensure_started(peer)
        fx = _Fixture(client, peer, auth)
        try:
            return _run_specs(fx, specs, progress)
        finally:
            fx.release()
    finally:
        if transport is not None:
            transport.close()
        if own_server is not None:
            stop_server(own_server)


def _run_specs(fx: _Fixture, specs: list[BenchSpec], progress) -> list[BenchResult]:
    client, auth = fx.client, fx.auth
    ops = {
        ("Key Creation", "Kyber"): lambda: client.create(fx.parent, c.TPM_ALG_KYBER768, auth, auth),
        ("Key Creation", "Dilithium"): lambda: client.create(fx.parent, c.TPM_ALG_DILITHIUM3, auth, auth),
        ("Signature", "Dilithium"): lambda: client.sign(fx.dilithium, PAPER_DIGEST, auth),
        ("Verify Signature", "Dilithium"): lambda: client.verify_signature(fx.dilithium, PAPER_DIGEST, fx.signature),
        ("Encryption", "Kyber"): lambda: client.kyber_encrypt(fx.kyber, PAPER_STRING),
        ("Decryption", "Kyber"): lambda: client.kyber_decrypt(fx.kyber, fx.blob, auth),
    }
    results = []
    rot_cache = {}
    for spec in specs:
        if progress:
            progress(f"{spec.operation} / {spec.algorithm}")
        key = (spec.operation, spec.algorithm)
        if spec.algorithm == "ROT":
            # one run of the protocol times both parties
            if spec.iterations not in rot_cache:
                rot_cache[spec.iterations] = _rot_runs(spec, client, fx.peer)
            receiver, sender = rot_cache[spec.iterations]
            samples = receiver if spec.operation == "ROT Receiver" else sender
            results.append(summarize(spec.operation, spec.algorithm, samples))
        elif key in ops:
            results.append(_measure(spec, ops[key]))
        else:
            raise ValueError(f"no benchmark for {spec.operation} / {spec.algorithm}")
    return results


def table_cells(results: Iterable[BenchResult]) -> list[list[str]]:
    medians = {(r.operation, r.algorithm): r.median for r in results}
    rows = []
    for op in ROWS:
        rows.append([op] + [f"{medians[(op, col)]:.4f}" if (op, col) in medians else "-" for col in COLUMNS])
    return rows


def render_table(results: Iterable[BenchResult]) -> str:
    """Aligned text table of medians in seconds, '-' for cells with no operation."""
    header = ["Median time (s)"] + list(COLUMNS)
    rows = [header] + table_cells(results)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = []
    for n, row in enumerate(rows):
        cells = [row[0].ljust(widths[0])] + [v.rjust(w) for v, w in zip(row[1:], widths[1:])]
        lines.append(" | ".join(cells))
        if n == 0:
            lines.append("-+-".join("-" * w for w in widths))
    return "\n".join(lines)


def write_csv(results: Iterable[BenchResult], path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for r in results:
            writer.writerow(r.row())


def rot_ratio(results: Iterable[BenchResult]) -> tuple[float, bool]:
    """ROT per-party median over the Kyber create+encrypt+decrypt medians, and whether it lies in RATIO_BAND."""
    medians = {(r.operation, r.algorithm): r.median for r in results}
    kyber = sum(medians[(op, "Kyber")] for op in ("Key Creation", "Encryption", "Decryption"))
    party = max(medians[("ROT Receiver", "ROT")], medians[("ROT Sender", "ROT")])
    ratio = party / kyber
    return ratio, RATIO_BAND[0] <= ratio <= RATIO_BAND[1]
