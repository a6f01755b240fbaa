import random

import numpy as np
import pytest

import oracles
from qtpm import dilithium as dl

RNG = random.Random(3)
Q = dl.Q


@pytest.mark.parametrize("seed", [RNG.randbytes(32) for _ in range(5)])
def test_matches_reference_implementation(seed):
    pk, sk = dl.keygen(seed)
    assert (pk, sk) == oracles.dilithium_keygen(seed)
    msg = RNG.randbytes(RNG.randint(0, 100))
    sig = dl.sign(sk, msg)
    assert sig == oracles.dilithium_sign(sk, msg)
    assert dl.verify(pk, msg, sig)
    assert oracles.dilithium_verify(pk, msg, sig)


def test_sizes():
    assert (dl.PUBLIC_KEY_BYTES, dl.SECRET_KEY_BYTES, dl.SIGNATURE_BYTES) == (1952, 4000, 3293)
    assert (dl.K, dl.L, dl.ETA, dl.TAU, dl.BETA, dl.OMEGA) == (6, 5, 4, 49, 196, 55)
    assert dl.GAMMA1 == 1 << 19 and dl.GAMMA2 == (Q - 1) // 32


@pytest.fixture(scope="module")
def keypair():
    pk, sk = dl.keygen(b"\x11" * 32)
    return pk, sk, dl.sign(sk, b"message")


def test_rejects_modified_inputs(keypair):
    pk, sk, sig = keypair
    assert not dl.verify(pk, b"messagf", sig)
    for pos in (0, 40, 3000, 3292):
        bad = bytearray(sig)
        bad[pos] ^= 0x10
        assert not dl.verify(pk, b"message", bytes(bad))
    other, _ = dl.keygen(b"\x12" * 32)
    assert not dl.verify(other, b"message", sig)


def test_bad_lengths_return_false(keypair):
    pk, _, sig = keypair
    assert not dl.verify(pk, b"message", sig[:-1])
    assert not dl.verify(pk[:-1], b"message", sig)
    assert not dl.verify(pk, b"message", b"")


def test_signing_is_deterministic(keypair):
    _, sk, sig = keypair
    assert dl.sign(sk, b"message") == sig


def test_power2round_identity():
    r = np.arange(0, Q, 997)
    r1, r0 = dl.power2round(r)
    assert np.array_equal(r1 * (1 << dl.D) + r0, r)
    assert r0.min() > -(1 << 12) and r0.max() <= 1 << 12


def test_decompose_identity_exhaustive_edges():
    r = np.r_[np.arange(0, 2 * dl.ALPHA), np.arange(Q - 2 * dl.ALPHA, Q)]
    r1, r0 = dl.decompose(r)
    assert np.array_equal((r1 * dl.ALPHA + r0) % Q, r)
    assert r1.max() < (Q - 1) // dl.ALPHA


def test_hint_identity_million_samples():
    # UseHint(MakeHint(z, r), r) == HighBits(r + z) for |z| <= gamma2
    rng = np.random.default_rng(2)
    r = rng.integers(0, Q, 10**6)
    z = rng.integers(-dl.GAMMA2, dl.GAMMA2 + 1, 10**6)
    h = dl.make_hint(z % Q, r)
    assert np.array_equal(dl.use_hint(h, r), dl.high_bits((r + z) % Q))


def test_rounding_rejects_out_of_range():
    with pytest.raises(dl.DilithiumError):
        dl.decompose([Q])
    with pytest.raises(dl.DilithiumError):
        dl.power2round([-1])


def test_hint_packing_round_trip():
    h = np.zeros((dl.K, dl.N), dtype=np.int64)
    h[0, [1, 5]] = 1
    h[5, 255] = 1
    packed = dl.pack_hint(h)
    assert len(packed) == dl.OMEGA + dl.K
    assert np.array_equal(dl.unpack_hint(packed), h)
    assert dl.unpack_hint(packed[:-1] + b"\xff") is None


def test_sample_in_ball_weight():
    c = dl.sample_in_ball(b"\x42" * 32)
    cc = np.where(c > Q // 2, c - Q, c)
    assert np.count_nonzero(cc) == dl.TAU
    assert set(np.unique(cc)) <= {-1, 0, 1}
