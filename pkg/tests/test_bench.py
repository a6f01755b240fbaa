import csv
import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qtpm import bench
from qtpm.tss import TssClient
from qtpm.transport import TcpTransport


@given(st.lists(st.floats(0, 10, allow_nan=False), min_size=1, max_size=200))
def test_quantiles_ordered(samples):
    r = bench.summarize("op", "alg", samples)
    assert r.min <= r.p25 <= r.median <= r.p75 <= r.max


def test_single_iteration():
    r = bench.summarize("op", "alg", [0.25])
    assert r.median == r.min == r.max == 0.25


def test_spec_validation():
    with pytest.raises(ValueError):
        bench.BenchSpec("x", "y", iterations=0)
    assert bench.BenchSpec("x", "y").iterations == 100
    assert bench.BenchSpec("x", "y").warmup == 5


class FakeClock:
    def __init__(self):
        self.t = 0.0
        self.step = itertools.count(1)

    def __call__(self):
        return self.t

    def advance(self):
        self.t += next(self.step)


def test_rot_party_times_are_message_sums(monkeypatch):
    clock = FakeClock()
    monkeypatch.setattr(bench.time, "perf_counter", clock)

    class Party:
        def rot_msg1(self, b):
            clock.advance()
            return b"1"

        def rot_msg2(self, m):
            clock.advance()
            return b"2"

        def rot_msg3(self, m):
            clock.advance()
            return b"3", b"mb"

        def rot_msg4(self, m):
            clock.advance()
            return b"m0", b"m1"

    spec = bench.BenchSpec("ROT Receiver", "ROT", iterations=2, warmup=1)
    receiver, sender = bench._rot_runs(spec, Party(), Party())
    # durations are 1,2,3,4 (warmup), then 5,6,7,8 and 9,10,11,12
    assert receiver == [5 + 7, 9 + 11]
    assert sender == [6 + 8, 10 + 12]


def fake_results():
    return [bench.summarize(op, alg, [0.1 * (i + 1)]) for i, (op, alg) in
            enumerate((s.operation, s.algorithm) for s in bench.default_specs(1, 0))]


def test_table_shape():
    rows = bench.table_cells(fake_results())
    assert [r[0] for r in rows] == list(bench.ROWS)
    dash = {(r[0], col) for r in rows for col, v in zip(bench.COLUMNS, r[1:]) if v == "-"}
    assert dash == {
        ("Signature", "Kyber"), ("Verify Signature", "Kyber"),
        ("Encryption", "Dilithium"), ("Decryption", "Dilithium"),
        ("ROT Receiver", "Kyber"), ("ROT Receiver", "Dilithium"),
        ("ROT Sender", "Kyber"), ("ROT Sender", "Dilithium"),
        ("Key Creation", "ROT"), ("Signature", "ROT"), ("Verify Signature", "ROT"),
        ("Encryption", "ROT"), ("Decryption", "ROT"),
    }
    text = bench.render_table(fake_results())
    assert len(text.splitlines()) == 2 + 7


def test_ratio():
    res = fake_results()
    ratio, ok = bench.rot_ratio(res)
    med = {(r.operation, r.algorithm): r.median for r in res}
    kyber = med[("Key Creation", "Kyber")] + med[("Encryption", "Kyber")] + med[("Decryption", "Kyber")]
    assert ratio == pytest.approx(max(med[("ROT Receiver", "ROT")], med[("ROT Sender", "ROT")]) / kyber)
    assert ok == (1.2 <= ratio <= 4.0)


def test_run_bench_over_tcp(server, tmp_path):
    with TcpTransport("127.0.0.1", server.port) as t:
        results = bench.run_bench(TssClient(t), bench.default_specs(iterations=2, warmup=1))
    assert [(r.operation, r.algorithm) for r in results] == [(s.operation, s.algorithm) for s in bench.default_specs()]
    assert all(len(r.samples) == 2 and r.median > 0 for r in results)
    out = tmp_path / "r.csv"
    bench.write_csv(results, out)
    with open(out) as f:
        rows = list(csv.DictReader(f))
    assert tuple(rows[0]) == bench.CSV_FIELDS
    assert len(rows) == 8


def test_bench_with_external_peer(server):
    from qtpm.tpm.core import Tpm
    from qtpm.transport import start_server, stop_server

    peer_srv = start_server(Tpm().dispatch)
    try:
        with TcpTransport("127.0.0.1", server.port) as t, TcpTransport("127.0.0.1", peer_srv.port) as p:
            specs = [bench.BenchSpec("ROT Receiver", "ROT", 2, 0), bench.BenchSpec("ROT Sender", "ROT", 2, 0)]
            results = bench.run_bench(TssClient(t), specs, peer=TssClient(p))
        assert [r.operation for r in results] == ["ROT Receiver", "ROT Sender"]
    finally:
        stop_server(peer_srv)


def test_unknown_cell_rejected(server):
    with TcpTransport("127.0.0.1", server.port) as t:
        with pytest.raises(ValueError):
            bench.run_bench(TssClient(t), [bench.BenchSpec("Signature", "Kyber", 1, 0)])
