"""Result codes shared by the adapters, the engine and the gateway."""

from __future__ import annotations

import enum


class ErrorCode(str, enum.Enum):
    E100 = "E100"  # structural / format
    E200 = "E200"  # credential proof or credential status
    E300 = "E300"  # chain structure, chain signatures, anchoring
    E400 = "E400"  # delegation semantics
    E500 = "E500"  # policy


OK = "OK"


class VerificationFailure(Exception):
    """A verification step rejected its input.

    ``detail`` is a short machine string such as ``"credential_signature"``.
    """

    def __init__(self, code: ErrorCode, detail: str):
        super().__init__(f"{code.value}: {detail}")
        self.code = code
        self.detail = detail


class FormatError(VerificationFailure):
    def __init__(self, detail: str):
        super().__init__(ErrorCode.E100, detail)
