"""Server and client settings.

The config file is plain ``key = value`` lines; ``#`` starts a comment.
Recognised keys: ``nv_path``, ``host``, ``port``, ``rng_seed`` (hex, enables
the deterministic test RNG) and ``timeout``.  QTPM_HOST and QTPM_PORT
override the file, and explicit flags override both.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 2321
DEFAULT_TIMEOUT = 30.0


@dataclass(frozen=True)
class Config:
    host: str = DEFAULT_HOST
    port: int = DEFAULT_PORT
    nv_path: str | None = None
    rng_seed: bytes | None = None
    timeout: float = DEFAULT_TIMEOUT


def parse_config(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def _coerce(values: dict) -> dict:
    known = {f.name for f in fields(Config)}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    out = dict(values)
    if "port" in out:
        out["port"] = int(out["port"])
    if "timeout" in out:
        out["timeout"] = float(out["timeout"])
    if isinstance(out.get("rng_seed"), str):
        out["rng_seed"] = bytes.fromhex(out["rng_seed"])
    return out


def load_config(path: str | os.PathLike | None = None, env=None, **overrides) -> Config:
    """Merge defaults, the optional file, the environment and non-None overrides."""
    env = os.environ if env is None else env
    values: dict = {}
    if path is not None:
        values.update(parse_config(Path(path).read_text()))
    if env.get("QTPM_HOST"):
        values["host"] = env["QTPM_HOST"]
    if env.get("QTPM_PORT"):
        values["port"] = env["QTPM_PORT"]
    values.update({k: v for k, v in overrides.items() if v is not None})
    return replace(Config(), **_coerce(values))
