"""Post-quantum software TPM: Kyber-768, Dilithium-III and ring-LWE oblivious transfer."""

__version__ = "0.1.0"
