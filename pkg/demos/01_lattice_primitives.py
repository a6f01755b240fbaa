"""Keccak and the negacyclic NTT, the two building blocks under everything else.

Run: python demos/01_lattice_primitives.py
"""

import hashlib

import numpy as np

from qtpm import keccak, ring

msg = b"abc"
print("SHA3-256(abc)  =", keccak.sha3_256(msg).hex())
print("hashlib agrees :", keccak.sha3_256(msg) == hashlib.sha3_256(msg).digest())
print("SHAKE128 32B   =", keccak.shake128(msg, 32).hex())

# multiply two polynomials in each ring, via the NTT and by hand
rng = np.random.default_rng(1)
for params in ring.ALL_PARAMS:
    a = rng.integers(0, params.q, params.n)
    b = rng.integers(0, params.q, params.n)
    fast = ring.poly_mul(ring.Poly(a, params), ring.Poly(b, params), params).coeffs
    slow = np.zeros(params.n, dtype=object)
    for i in range(params.n):
        for j in range(params.n):
            k = i + j
            term = int(a[i]) * int(b[j])
            if k >= params.n:
                slow[k - params.n] -= term
            else:
                slow[k] += term
    slow = np.array([int(x) % params.q for x in slow])
    print(f"{params.name:>9}: n={params.n} q={params.q} root={params.root}  NTT == schoolbook: {np.array_equal(fast, slow)}")
