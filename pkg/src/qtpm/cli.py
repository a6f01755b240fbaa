"""Command-line TSS front-end and server launcher.

Every subcommand sends exactly one TPM command (``bench`` sends many).
Keys are referred to through small JSON context files holding the handle
and algorithm; blobs are binary files, and results go to stdout as hex.

Exit codes: 0 success, 1 the TPM returned an error (its name is printed),
2 transport failure, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import keccak
from .config import load_config
from .tpm import constants as c
from .transport import TcpTransport, TransportError, serve
from .tss import TpmResponseError, TssClient, cmd_startup

EXIT_OK = 0
EXIT_TPM = 1
EXIT_TRANSPORT = 2
EXIT_USAGE = 64

ALGORITHMS = {"kyber": c.TPM_ALG_KYBER768, "dilithium": c.TPM_ALG_DILITHIUM3}
ALG_LABELS = {v: k for k, v in ALGORITHMS.items()}
PUBLIC_SIZES = {1184: c.TPM_ALG_KYBER768, 1952: c.TPM_ALG_DILITHIUM3}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- context and blob files ---------------------------------------------------------

def write_context(path, handle: int, algorithm: int) -> None:
    Path(path).write_text(json.dumps({"handle": f"0x{handle:08X}", "algorithm": ALG_LABELS[algorithm]}) + "\n")


def read_context(path) -> tuple[int, int]:
    try:
        ctx = json.loads(Path(path).read_text())
        return int(ctx["handle"], 16), ALGORITHMS[ctx["algorithm"]]
    except (OSError, ValueError, KeyError) as e:
        raise UsageError(f"cannot read context file {path}: {e}") from e


def read_blob(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise UsageError(str(e)) from e


def write_blob(path, data: bytes) -> None:
    Path(path).write_bytes(data)


def _auth(args, name: str = "auth") -> bytes:
    value = getattr(args, name, None)
    return value.encode() if value is not None else b""


def _digest(args) -> bytes:
    if args.digest is not None:
        return bytes.fromhex(args.digest)
    if args.message is None:
        raise UsageError("one of --message or --digest is required")
    return keccak.sha3_256(read_blob(args.message))


# -- subcommand handlers ----------------------------------------------------------------

def do_startup(client, args):
    client.startup(c.TPM_SU_STATE if args.state else c.TPM_SU_CLEAR)
    print("ok")


def do_shutdown(client, args):
    client.shutdown(c.TPM_SU_STATE if args.state else c.TPM_SU_CLEAR)
    print("ok")


def do_create_primary(client, args):
    alg = ALGORITHMS[args.alg]
    handle, public = client.create_primary(alg, _auth(args))
    if args.out:
        write_context(args.out, handle, alg)
    if args.public:
        write_blob(args.public, public)
    print(f"handle 0x{handle:08X}")


def do_create(client, args):
    parent, _ = read_context(args.parent)
    key = client.create(parent, ALGORITHMS[args.alg], _auth(args), _auth(args, "parent_auth"))
    write_blob(f"{args.out}.priv", key.private)
    write_blob(f"{args.out}.pub", key.public)
    print(f"private {args.out}.priv {len(key.private)}")
    print(f"public {args.out}.pub {len(key.public)}")


def do_load(client, args):
    parent, _ = read_context(args.parent)
    private = read_blob(args.private or f"{args.blobs}.priv")
    public = read_blob(args.public or f"{args.blobs}.pub")
    alg = PUBLIC_SIZES.get(len(public))
    if alg is None:
        raise UsageError(f"public blob of {len(public)} bytes matches no algorithm")
    handle = client.load(parent, private, public, _auth(args, "parent_auth"))
    write_context(args.out, handle, alg)
    print(f"handle 0x{handle:08X}")


def do_flush(client, args):
    handle, _ = read_context(args.key)
    client.flush_context(handle)
    print("ok")


def do_sign(client, args):
    key, _ = read_context(args.key)
    sig = client.sign(key, _digest(args), _auth(args))
    if args.out:
        write_blob(args.out, sig)
    else:
        print(sig.hex())


def do_verify(client, args):
    key, _ = read_context(args.key)
    client.verify_signature(key, _digest(args), read_blob(args.signature))
    print("signature ok")


def do_kyber_encrypt(client, args):
    key, _ = read_context(args.key)
    blob = client.kyber_encrypt(key, read_blob(args.message))
    if args.out:
        write_blob(args.out, blob)
    else:
        print(blob.hex())


def do_kyber_decrypt(client, args):
    key, _ = read_context(args.key)
    plain = client.kyber_decrypt(key, read_blob(args.input), _auth(args))
    if args.out:
        write_blob(args.out, plain)
    else:
        print(plain.hex())


def do_kyber_encap(client, args):
    key, _ = read_context(args.key)
    ss, ct = client.kyber_enc(key)
    write_blob(args.out, ct)
    print(ss.hex())


def do_kyber_decap(client, args):
    key, _ = read_context(args.key)
    print(client.kyber_dec(key, read_blob(args.input), _auth(args)).hex())


def do_rot_msg1(client, args):
    write_blob(args.out, client.rot_msg1(args.choice))
    print("msg1", args.out)


def do_rot_msg2(client, args):
    write_blob(args.out, client.rot_msg2(read_blob(args.input)))
    print("msg2", args.out)


def do_rot_msg3(client, args):
    msg3, mb = client.rot_msg3(read_blob(args.input))
    write_blob(args.out, msg3)
    print("m_b", mb.hex())


def do_rot_msg4(client, args):
    m0, m1 = client.rot_msg4(read_blob(args.input))
    if args.out:
        write_blob(args.out, m0 + m1)
    print("m0", m0.hex())
    print("m1", m1.hex())


def do_bench(client, args):
    from . import bench

    peer_transport = None
    peer = None
    if args.peer_port is not None:
        peer_transport = TcpTransport(args.peer_host, args.peer_port, args.timeout)
        peer = TssClient(peer_transport)
    specs = bench.default_specs(args.iterations, args.warmup)
    progress = (lambda s: print(f"  {s}", file=sys.stderr)) if args.verbose else None
    try:
        results = bench.run_bench(client, specs, peer, progress=progress)
    finally:
        if peer_transport is not None:
            peer_transport.close()
    print(bench.render_table(results))
    if args.out:
        bench.write_csv(results, args.out)
    ratio, ok = bench.rot_ratio(results)
    print(f"ROT per-party / Kyber(create+enc+dec) = {ratio:.2f}")
    if not ok:
        lo, hi = bench.RATIO_BAND
        print(f"warning: ratio outside the informational band [{lo}, {hi}]", file=sys.stderr)


# -- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qtpm", description="Client for the post-quantum software TPM.")
    p.add_argument("--host", help="server host (env QTPM_HOST, default 127.0.0.1)")
    p.add_argument("--port", type=int, help="server port (env QTPM_PORT, default 2321)")
    p.add_argument("--timeout", type=float, help="seconds to wait for a response (default 30)")
    p.add_argument("--config", help="key = value config file")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    def add(name, fn, help_text):
        sp = sub.add_parser(name, help=help_text, description=help_text)
        sp.set_defaults(func=fn)
        return sp

    for name, fn, text in (("startup", do_startup, "TPM2_Startup"), ("shutdown", do_shutdown, "TPM2_Shutdown")):
        sp = add(name, fn, text)
        sp.add_argument("--state", action="store_true", help="use TPM_SU_STATE instead of TPM_SU_CLEAR")

    sp = add("create-primary", do_create_primary, "derive a primary storage key from the owner seed")
    sp.add_argument("--alg", choices=ALGORITHMS, default="kyber")
    sp.add_argument("--auth", help="password for the new key")
    sp.add_argument("--out", help="context file to write")
    sp.add_argument("--public", help="file for the public blob")

    sp = add("create", do_create, "create a child key under a loaded parent")
    sp.add_argument("--parent", required=True, help="parent context file")
    sp.add_argument("--parent-auth", help="parent password")
    sp.add_argument("--alg", choices=ALGORITHMS, required=True)
    sp.add_argument("--auth", help="password for the new key")
    sp.add_argument("--out", required=True, help="prefix for OUT.priv and OUT.pub")

    sp = add("load", do_load, "load a wrapped key under its parent")
    sp.add_argument("--parent", required=True, help="parent context file")
    sp.add_argument("--parent-auth", help="parent password")
    sp.add_argument("--blobs", help="prefix of .priv/.pub files written by create")
    sp.add_argument("--private", help="private blob file")
    sp.add_argument("--public", help="public blob file")
    sp.add_argument("--out", required=True, help="context file to write")

    sp = add("flush", do_flush, "flush a loaded key")
    sp.add_argument("--key", required=True, help="context file")

    for name, fn, text in (("sign", do_sign, "sign SHA3-256(message) with a Dilithium key"),
                           ("verify", do_verify, "verify a Dilithium signature")):
        sp = add(name, fn, text)
        sp.add_argument("--key", required=True, help="context file")
        sp.add_argument("--message", help="message file, hashed with SHA3-256")
        sp.add_argument("--digest", help="32-byte digest as hex, instead of --message")
        if name == "sign":
            sp.add_argument("--auth", help="key password")
            sp.add_argument("--out", help="signature file (hex to stdout if omitted)")
        else:
            sp.add_argument("--signature", required=True, help="signature file")

    sp = add("kyber-encrypt", do_kyber_encrypt, "encrypt up to 1024 bytes to a Kyber key")
    sp.add_argument("--key", required=True)
    sp.add_argument("--message", required=True, help="plaintext file")
    sp.add_argument("--out", help="ciphertext file (hex to stdout if omitted)")

    sp = add("kyber-decrypt", do_kyber_decrypt, "decrypt a kyber-encrypt blob")
    sp.add_argument("--key", required=True)
    sp.add_argument("--auth", help="key password")
    sp.add_argument("--in", dest="input", required=True, help="ciphertext file")
    sp.add_argument("--out", help="plaintext file (hex to stdout if omitted)")

    sp = add("kyber-encap", do_kyber_encap, "encapsulate a fresh shared secret; prints it as hex")
    sp.add_argument("--key", required=True)
    sp.add_argument("--out", required=True, help="ciphertext file")

    sp = add("kyber-decap", do_kyber_decap, "decapsulate a ciphertext; prints the shared secret")
    sp.add_argument("--key", required=True)
    sp.add_argument("--auth", help="key password")
    sp.add_argument("--in", dest="input", required=True, help="ciphertext file")

    sp = add("rot-msg1", do_rot_msg1, "receiver: start a ROT session with choice bit b")
    sp.add_argument("--choice", type=int, choices=(0, 1), required=True)
    sp.add_argument("--out", required=True)
    for n, fn, text in ((2, do_rot_msg2, "sender: answer MSG1"),
                        (3, do_rot_msg3, "receiver: answer MSG2; prints m_b"),
                        (4, do_rot_msg4, "sender: answer MSG3; prints m0 and m1")):
        sp = add(f"rot-msg{n}", fn, text)
        sp.add_argument("--in", dest="input", required=True, help=f"MSG{n - 1} file")
        sp.add_argument("--out", required=n != 4, help="output file" if n != 4 else "file for m0 || m1")

    sp = add("bench", do_bench, "time each command over many runs")
    sp.add_argument("--iterations", type=int, default=100)
    sp.add_argument("--warmup", type=int, default=5)
    sp.add_argument("--out", help="CSV output file")
    sp.add_argument("--peer-host", default="127.0.0.1", help="second TPM acting as ROT sender")
    sp.add_argument("--peer-port", type=int, help="omit to start an in-process peer")
    sp.add_argument("-v", "--verbose", action="store_true")
    return p


def run_cli(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config, host=args.host, port=args.port, timeout=args.timeout)
    except (OSError, ValueError) as e:
        print(f"qtpm: {e}", file=sys.stderr)
        return EXIT_USAGE
    args.timeout = cfg.timeout
    transport = TcpTransport(cfg.host, cfg.port, cfg.timeout)
    try:
        args.func(TssClient(transport), args)
    except TpmResponseError as e:
        print(f"qtpm: {e.rc_name} (0x{e.rc:03X})", file=sys.stderr)
        return EXIT_TPM
    except TransportError as e:
        print(f"qtpm: transport error: {e}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (UsageError, ValueError) as e:
        print(f"qtpm: {e}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        transport.close()
    return EXIT_OK


def main() -> None:
    sys.exit(run_cli())


# -- server ----------------------------------------------------------------------------

def build_server_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qtpm-server", description="Run the software TPM on a TCP port.")
    p.add_argument("--host", help="bind address (env QTPM_HOST, default 127.0.0.1)")
    p.add_argument("--port", type=int, help="port (env QTPM_PORT, default 2321)")
    p.add_argument("--nv", dest="nv_path", help="backing file for the 64 kB NV image")
    p.add_argument("--rng-seed", help="hex seed; enables the deterministic test RNG")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--startup", action="store_true", help="issue TPM2_Startup before serving")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def server_main(argv=None) -> int:
    from .tpm.core import Tpm

    args = build_server_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, host=args.host, port=args.port, nv_path=args.nv_path, rng_seed=args.rng_seed)
    except (OSError, ValueError) as e:
        print(f"qtpm-server: {e}", file=sys.stderr)
        return EXIT_USAGE
    tpm = Tpm(cfg.nv_path, cfg.rng_seed)
    if args.startup:
        tpm.dispatch(cmd_startup())
    print(f"qtpm-server listening on {cfg.host}:{cfg.port}", flush=True)
    serve(cfg.port, tpm.dispatch, cfg.host)
    return EXIT_OK


def server_entry() -> None:
    sys.exit(server_main())


if __name__ == "__main__":
    main()
