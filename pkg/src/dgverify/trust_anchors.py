"""Offline, file-backed registry of verification keys and status lists."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

from .model import b64url_decode, b64url_encode

ED25519 = "Ed25519"
SUPPORTED_ALGORITHMS = frozenset({ED25519})


class RegistryError(Exception):
    """The registry file could not be loaded; nothing is partially loaded."""


class ResolutionError(LookupError):
    pass


class KeyNotFound(ResolutionError):
    pass


class KeyRevoked(ResolutionError):
    pass


class UnknownStatusList(ResolutionError):
    pass


class StatusIndexOutOfRange(ResolutionError):
    pass


@dataclass(frozen=True)
class KeyRecord:
    key_id: str
    controller: str
    algorithm: str
    public_key: bytes
    revoked: bool = False

    def to_json(self) -> dict:
        return {
            "key_id": self.key_id,
            "controller": self.controller,
            "algorithm": self.algorithm,
            "public_key": b64url_encode(self.public_key),
            "revoked": self.revoked,
        }


@dataclass(frozen=True)
class StatusDocument:
    id: str
    encoded_list: str
    issued_at: int
    purpose: str = "revocation"

    @property
    def bits(self) -> bytes:
        return b64url_decode(self.encoded_list)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "purpose": self.purpose,
            "encoded_list": self.encoded_list,
            "issued_at": self.issued_at,
        }


@dataclass(frozen=True)
class TrustRegistry:
    keys: Mapping[str, KeyRecord] = field(default_factory=dict)
    status_docs: Mapping[str, StatusDocument] = field(default_factory=dict)
    trust_roots: frozenset[str] = frozenset()

    def to_json(self) -> dict:
        return {
            "keys": [k.to_json() for k in self.keys.values()],
            "status_docs": [d.to_json() for d in self.status_docs.values()],
            "trust_roots": sorted(self.trust_roots),
        }


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise RegistryError(message)


def _key_from_json(entry) -> KeyRecord:
    _require(isinstance(entry, dict), "key entry must be an object")
    for name in ("key_id", "controller", "algorithm", "public_key"):
        _require(isinstance(entry.get(name), str) and entry[name] != "", f"key entry missing {name}")
    revoked = entry.get("revoked", False)
    _require(isinstance(revoked, bool), "revoked must be a boolean")
    _require(entry["algorithm"] in SUPPORTED_ALGORITHMS, f"unsupported algorithm {entry['algorithm']}")
    try:
        raw = b64url_decode(entry["public_key"])
    except ValueError:
        raise RegistryError(f"public_key of {entry['key_id']} is not base64url") from None
    _require(len(raw) == 32, f"public_key of {entry['key_id']} is not 32 bytes")
    return KeyRecord(entry["key_id"], entry["controller"], entry["algorithm"], raw, revoked)


def _status_from_json(entry) -> StatusDocument:
    _require(isinstance(entry, dict), "status entry must be an object")
    _require(isinstance(entry.get("id"), str) and entry["id"] != "", "status entry missing id")
    _require(entry.get("purpose") == "revocation", "status purpose must be 'revocation'")
    issued = entry.get("issued_at")
    _require(isinstance(issued, int) and not isinstance(issued, bool), "issued_at must be an integer")
    try:
        bits = b64url_decode(entry.get("encoded_list"))
    except ValueError:
        raise RegistryError(f"encoded_list of {entry['id']} is not base64url") from None
    _require(len(bits) >= 1, f"encoded_list of {entry['id']} is empty")
    return StatusDocument(entry["id"], entry["encoded_list"], issued)


def registry_from_json(data) -> TrustRegistry:
    _require(isinstance(data, dict), "registry must be a JSON object")
    for name in ("keys", "status_docs", "trust_roots"):
        _require(isinstance(data.get(name), list), f"registry.{name} must be a list")
    keys: dict[str, KeyRecord] = {}
    for entry in data["keys"]:
        rec = _key_from_json(entry)
        _require(rec.key_id not in keys, f"duplicate key_id {rec.key_id}")
        keys[rec.key_id] = rec
    docs: dict[str, StatusDocument] = {}
    for entry in data["status_docs"]:
        doc = _status_from_json(entry)
        _require(doc.id not in docs, f"duplicate status list {doc.id}")
        docs[doc.id] = doc
    roots = data["trust_roots"]
    _require(all(isinstance(r, str) for r in roots), "trust_roots must be strings")
    active_controllers = {k.controller for k in keys.values() if not k.revoked}
    for root in roots:
        _require(root in active_controllers, f"trust root {root} has no active key")
    return TrustRegistry(MappingProxyType(keys), MappingProxyType(docs), frozenset(roots))


def load_registry(path) -> TrustRegistry:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise RegistryError(f"cannot read registry: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RegistryError(f"registry is not JSON: {exc}") from exc
    return registry_from_json(data)


def resolve_key(registry: TrustRegistry, key_id: str) -> KeyRecord:
    rec = registry.keys.get(key_id)
    if rec is None:
        raise KeyNotFound(key_id)
    if rec.revoked:
        raise KeyRevoked(key_id)
    return rec


def resolve_status(registry: TrustRegistry, list_id: str, index: int) -> bool:
    """Return the revocation bit at ``index`` (most-significant bit first)."""
    doc = registry.status_docs.get(list_id)
    if doc is None:
        raise UnknownStatusList(list_id)
    bits = doc.bits
    if index < 0 or index >= len(bits) * 8:
        raise StatusIndexOutOfRange(f"{list_id}[{index}]")
    return bool((bits[index // 8] >> (7 - index % 8)) & 1)


def encode_status_list(revoked_indices, size_bits: int = 128) -> str:
    """Build a raw base64url bitstring with the given indices set."""
    buf = bytearray((size_bits + 7) // 8)
    for idx in revoked_indices:
        buf[idx // 8] |= 0x80 >> (idx % 8)
    return b64url_encode(bytes(buf))
