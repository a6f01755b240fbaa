"""Software TPM: wire format, NV store, key objects and the command dispatcher."""

from .core import COMMANDS, Tpm, TpmError
from .marshal import TpmResponse, build_command, parse_response
from .nv import NvStore

__all__ = ["COMMANDS", "NvStore", "Tpm", "TpmError", "TpmResponse", "build_command", "parse_response"]
