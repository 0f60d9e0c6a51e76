"""Finite-key BB84 variants: GF(2) codes, sampling bounds, protocol simulation and a small quantum verifier."""

from .gf2_linalg import BitMatrix, BitString
from .sampling_bounds import ProtocolParams, SecurityBound, Variant, asymptotic_threshold, security_bound

__all__ = ["BitMatrix", "BitString", "ProtocolParams", "SecurityBound", "Variant", "asymptotic_threshold", "security_bound"]
__version__ = "0.1.0"
