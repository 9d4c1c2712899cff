"""Verification of credentials and delegation chains under one canonical context."""

from .codes import ErrorCode, FormatError, VerificationFailure
from .engine import VerifierKey, verify
from .model import CanonicalVerificationContext, VerificationPolicy, VerificationResultObject

__all__ = [
    "CanonicalVerificationContext",
    "ErrorCode",
    "FormatError",
    "VerificationFailure",
    "VerificationPolicy",
    "VerificationResultObject",
    "VerifierKey",
    "verify",
]

__version__ = "0.1.0"
