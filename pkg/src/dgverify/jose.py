"""Minimal compact-JWS (EdDSA) and SD-JWT helpers."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from .model import b64url_decode, b64url_encode

EDDSA_ALGS = frozenset({"EdDSA", "Ed25519"})


class JoseError(ValueError):
    pass


@dataclass(frozen=True)
class CompactJWS:
    header: dict
    payload: dict
    signing_input: bytes
    signature: bytes


def private_key_from_seed(seed: bytes) -> Ed25519PrivateKey:
    return Ed25519PrivateKey.from_private_bytes(seed)


def public_bytes(key: Ed25519PrivateKey) -> bytes:
    return key.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)


def ed25519_verify(public_key: bytes, signature: bytes, message: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
    except (InvalidSignature, ValueError):
        return False
    return True


def _json_segment(obj) -> str:
    return b64url_encode(json.dumps(obj, separators=(",", ":"), sort_keys=True).encode("utf-8"))


def sign_compact(header: dict, payload, key: Ed25519PrivateKey) -> str:
    """Sign ``payload`` (dict, or raw bytes) as a compact EdDSA JWS."""
    head = _json_segment(header)
    body = b64url_encode(payload) if isinstance(payload, bytes) else _json_segment(payload)
    signing_input = f"{head}.{body}".encode("ascii")
    return f"{head}.{body}.{b64url_encode(key.sign(signing_input))}"


def looks_compact(token) -> bool:
    if not isinstance(token, str) or "~" in token:
        return False
    parts = token.split(".")
    if len(parts) != 3 or not all(parts):
        return False
    try:
        for part in parts:
            b64url_decode(part)
    except ValueError:
        return False
    return True


def _decode_json_segment(segment: str, what: str) -> dict:
    try:
        value = json.loads(b64url_decode(segment))
    except (ValueError, UnicodeDecodeError):
        raise JoseError(f"{what}_not_json") from None
    if not isinstance(value, dict):
        raise JoseError(f"{what}_not_object")
    return value


def decode_compact(token: str) -> CompactJWS:
    """Split and decode a compact JWS without checking the signature."""
    if not isinstance(token, str):
        raise JoseError("token_not_string")
    parts = token.split(".")
    if len(parts) != 3:
        raise JoseError("segment_count")
    header = _decode_json_segment(parts[0], "header")
    payload = _decode_json_segment(parts[1], "payload")
    try:
        signature = b64url_decode(parts[2])
    except ValueError:
        raise JoseError("signature_encoding") from None
    if header.get("alg") not in EDDSA_ALGS:
        raise JoseError("unsupported_alg")
    kid = header.get("kid")
    if not isinstance(kid, str) or not kid:
        raise JoseError("missing_kid")
    return CompactJWS(header, payload, f"{parts[0]}.{parts[1]}".encode("ascii"), signature)


def make_disclosure(salt: str, name: str, value) -> str:
    return b64url_encode(json.dumps([salt, name, value], separators=(",", ":")).encode("utf-8"))


def disclosure_digest(disclosure: str) -> str:
    return b64url_encode(hashlib.sha256(disclosure.encode("ascii")).digest())
