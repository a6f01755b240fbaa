"""Drive two software TPMs over TCP: keys, signing, encryption and a ROT run.

Starts both servers in-process on free loopback ports.

Run: python demos/04_tpm_over_tcp.py
"""

from qtpm import keccak, tss
from qtpm.tpm import constants as c
from qtpm.tpm.core import Tpm
from qtpm.transport import TcpTransport, start_server, stop_server
from qtpm.tss import TpmResponseError, TssClient

message = "My super secret. Please don’t share.\n".encode("utf-8")

srv_a, srv_b = start_server(Tpm().dispatch), start_server(Tpm().dispatch)
print(f"TPM A on port {srv_a.port}, TPM B on port {srv_b.port}")
try:
    with TcpTransport("127.0.0.1", srv_a.port) as ta, TcpTransport("127.0.0.1", srv_b.port) as tb:
        a, b = TssClient(ta), TssClient(tb)
        a.startup()
        b.startup()

        parent, _ = a.create_primary(c.TPM_ALG_KYBER768, b"owner")
        signer = a.create(parent, c.TPM_ALG_DILITHIUM3, b"key", b"owner")
        sign_handle = a.load(parent, signer.private, signer.public, b"owner")
        enc = a.create(parent, c.TPM_ALG_KYBER768, b"key", b"owner")
        enc_handle = a.load(parent, enc.private, enc.public, b"owner")
        print(f"parent 0x{parent:08X}, Dilithium key 0x{sign_handle:08X}, Kyber key 0x{enc_handle:08X}")
        print(f"private blob {len(signer.private)} B (wrapped seed), public {len(signer.public)} B")

        digest = keccak.sha3_256(message)
        sig = a.sign(sign_handle, digest, b"key")
        a.verify_signature(sign_handle, digest, sig)
        print(f"signed and verified the message digest ({len(sig)} B signature)")

        try:
            a.sign(sign_handle, digest, b"wrong")
        except TpmResponseError as e:
            print("wrong password:", e.rc_name)

        blob = a.kyber_encrypt(enc_handle, message)
        print("decrypted:", a.kyber_decrypt(enc_handle, blob, b"key").decode().strip())
        ss, ct = a.kyber_enc(enc_handle)
        print("encap/decap secrets match:", a.kyber_dec(enc_handle, ct, b"key") == ss)

        mb, (m0, m1) = tss.rot_exchange(a, b, choice=1)
        print("ROT with b=1, receiver got m1:", mb == m1 and mb != m0)

        a.flush_context(enc_handle)
        try:
            a.kyber_enc(enc_handle)
        except TpmResponseError as e:
            print("flushed handle:", e.rc_name)
finally:
    stop_server(srv_a)
    stop_server(srv_b)
