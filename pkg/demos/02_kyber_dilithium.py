"""Kyber-768 key encapsulation, hybrid data encryption and Dilithium-III signatures.

Run: python demos/02_kyber_dilithium.py
"""

import os

from qtpm import dilithium, keccak, kyber

message = "My super secret. Please don’t share.\n".encode("utf-8")

pk, sk = kyber.keygen(os.urandom(32), os.urandom(32))
ct, ss = kyber.encapsulate(pk, os.urandom(32))
print(f"Kyber-768   pk {len(pk)} B, sk {len(sk)} B, ct {len(ct)} B")
print("decapsulated secret matches:", kyber.decapsulate(sk, ct) == ss)

blob = kyber.data_encrypt(pk, message)
print(f"hybrid blob {len(blob)} B = ct {kyber.CIPHERTEXT_BYTES} + nonce {kyber.NONCE_BYTES}"
      f" + data {len(message)} + tag {kyber.TAG_BYTES}")
print("round trip:", kyber.data_decrypt(sk, blob).decode())

tampered = bytearray(blob)
tampered[-1] ^= 1
try:
    kyber.data_decrypt(sk, bytes(tampered))
except kyber.IntegrityError as e:
    print("tampered blob rejected:", e)

vk, signing_key = dilithium.keygen(os.urandom(32))
digest = keccak.sha3_256(message)
sig = dilithium.sign(signing_key, digest)
print(f"Dilithium-III pk {len(vk)} B, sk {len(signing_key)} B, sig {len(sig)} B")
print("signature verifies:", dilithium.verify(vk, digest, sig))
print("flipped bit verifies:", dilithium.verify(vk, digest, bytes([sig[0] ^ 1]) + sig[1:]))
