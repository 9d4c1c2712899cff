"""Canonical data model: verification context, delegation grants, policy, results.

All types are plain frozen dataclasses. They do not validate on construction so
that malformed contexts can still be built and rejected by the structural
check; ``validate_*`` helpers enforce the invariants and raise ``FormatError``.
"""

from __future__ import annotations

import base64
import binascii
import dataclasses
import enum
import hashlib
import json
import re
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any, Optional

from .codes import FormatError

MAX_CHAIN_DEPTH = 16

FLAG_NAMES = (
    "scope_containment",
    "temporal_validity",
    "signature_verification",
    "chain_integrity",
    "structural_validity",
)

_B64URL_RE = re.compile(r"^[A-Za-z0-9_-]*$")
_ATOM_RE = re.compile(r"^[a-z0-9_.-]+:[a-z0-9_.-]+$")
_HEX64_RE = re.compile(r"^[0-9a-f]{64}$")


class SourceFormat(str, enum.Enum):
    VC_JWT = "VC_JWT"
    VC_LD = "VC_LD"


class ProofKind(str, enum.Enum):
    JWS_ED25519 = "JWS_ED25519"
    SD_JWT = "SD_JWT"
    LD_STUB = "LD_STUB"


class Profile(str, enum.Enum):
    FEDERATED = "FEDERATED"
    SSI = "SSI"
    HYBRID = "HYBRID"


ADMISSIBLE_PROOFS = {
    SourceFormat.VC_JWT: {ProofKind.JWS_ED25519},
    SourceFormat.VC_LD: {ProofKind.LD_STUB},
}


def b64url_encode(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode("ascii")


def b64url_decode(text: str) -> bytes:
    """Strict unpadded base64url decoding; raises ``ValueError`` on bad input."""
    if not isinstance(text, str) or not _B64URL_RE.match(text) or len(text) % 4 == 1:
        raise ValueError("not base64url")
    try:
        return base64.urlsafe_b64decode(text + "=" * (-len(text) % 4))
    except (binascii.Error, ValueError) as exc:
        raise ValueError("not base64url") from exc


def is_fingerprint(value: Any) -> bool:
    return isinstance(value, str) and bool(_HEX64_RE.match(value))


@dataclass(frozen=True)
class Clock:
    """Injected verification time, integer Unix seconds."""

    now: int


@dataclass(frozen=True)
class StatusRef:
    list_id: str
    index: int


@dataclass(frozen=True)
class ProofObject:
    kind: ProofKind
    key_id: str
    signature: bytes
    signed_payload: bytes = b""


@dataclass(frozen=True)
class Scope:
    permissions: frozenset[str] = frozenset()

    @classmethod
    def of(cls, *permissions: str) -> "Scope":
        return cls(frozenset(permissions))

    def __iter__(self):
        return iter(sorted(self.permissions))

    def __len__(self) -> int:
        return len(self.permissions)


@dataclass(frozen=True)
class NormalizedCredential:
    source_format: SourceFormat
    issuer: str
    subject: str
    claims: Mapping[str, Any]
    issued_at: int
    expires_at: int
    status_ref: Optional[StatusRef]
    proof: ProofObject
    raw_size_bytes: int


@dataclass(frozen=True)
class DelegationGrant:
    grant_id: str
    issuer: str
    subject: str
    scope: Scope
    not_before: int
    not_after: int
    key_binding: str
    status_ref: Optional[StatusRef]
    proof: ProofObject
    constraints: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class VerificationPolicy:
    policy_id: str
    trusted_issuers: frozenset[str]
    allowed_credential_types: frozenset[SourceFormat]
    max_chain_depth: int
    max_status_age_seconds: int
    require_anchor: bool = False
    required_scope: Optional[Scope] = None

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "VerificationPolicy":
        required = data.get("required_scope")
        return cls(
            policy_id=data["policy_id"],
            trusted_issuers=frozenset(data["trusted_issuers"]),
            allowed_credential_types=frozenset(
                SourceFormat(t) for t in data["allowed_credential_types"]
            ),
            max_chain_depth=data["max_chain_depth"],
            max_status_age_seconds=data["max_status_age_seconds"],
            require_anchor=bool(data.get("require_anchor", False)),
            required_scope=Scope(frozenset(required)) if required is not None else None,
        )

    def to_dict(self) -> dict:
        return to_canonical(self)


@dataclass(frozen=True)
class StatusResolution:
    list_id: str
    index: int
    revoked: bool
    document_issued_at: int


@dataclass(frozen=True)
class StatusContext:
    checked_at: int
    resolutions: tuple[StatusResolution, ...] = ()

    def find(self, ref: StatusRef) -> Optional[StatusResolution]:
        for res in self.resolutions:
            if res.list_id == ref.list_id and res.index == ref.index:
                return res
        return None


@dataclass(frozen=True)
class CanonicalVerificationContext:
    request_id: str
    issuer_ids: frozenset[str]
    subject_id: str
    credentials: tuple[NormalizedCredential, ...]
    presenter_proof: Optional[ProofObject]
    chain: tuple[DelegationGrant, ...]
    policy: VerificationPolicy
    status: StatusContext
    metadata: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class VerificationResultObject:
    request_id: str
    result: str
    detail: str
    profile: str
    cvc_hash: str
    chain_fingerprint: Optional[str]
    effective_scope: Optional[Scope]
    invariant_flags: Mapping[str, bool]
    checked_at: int
    policy_id: str

    @property
    def ok(self) -> bool:
        return self.result == "OK"


# -- canonical serialization ------------------------------------------------


def to_canonical(value: Any) -> Any:
    """Map a canonical value onto plain JSON types (no floats)."""
    if isinstance(value, Scope):
        return sorted(value.permissions)
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: to_canonical(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, enum.Enum):
        return value.value
    if value is None or isinstance(value, (bool, str)):
        return value
    if isinstance(value, int):
        return int(value)
    if isinstance(value, float):
        raise TypeError("floating-point values are not canonical")
    if isinstance(value, (bytes, bytearray)):
        return b64url_encode(bytes(value))
    if isinstance(value, Mapping):
        out = {}
        for key, item in value.items():
            if not isinstance(key, str):
                raise TypeError(f"non-string key {key!r}")
            out[key] = to_canonical(item)
        return out
    if isinstance(value, (set, frozenset)):
        items = [to_canonical(v) for v in value]
        return sorted(items, key=_dumps)
    if isinstance(value, (list, tuple)):
        return [to_canonical(v) for v in value]
    raise TypeError(f"cannot canonicalize {type(value).__name__}")


def _dumps(value: Any) -> str:
    return json.dumps(
        value, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False
    )


def canonical_serialize(value: Any) -> bytes:
    return _dumps(to_canonical(value)).encode("utf-8")


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class EmptyChainError(ValueError):
    pass


def chain_fingerprint(chain) -> str:
    chain = list(chain)
    if not chain:
        raise EmptyChainError("cannot fingerprint an empty chain")
    return sha256_hex(canonical_serialize(chain))


def scope_contains(parent: Scope, child: Scope) -> bool:
    return child.permissions <= parent.permissions


# -- invariant checks -------------------------------------------------------


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _nonempty_str(value: Any) -> bool:
    return isinstance(value, str) and value != ""


def validate_scope(scope: Scope, where: str) -> None:
    if not isinstance(scope, Scope) or not isinstance(scope.permissions, frozenset):
        raise FormatError(f"{where}.scope")
    for atom in scope.permissions:
        if not isinstance(atom, str) or not _ATOM_RE.match(atom):
            raise FormatError(f"{where}.scope")


def validate_status_ref(ref: Optional[StatusRef], where: str) -> None:
    if ref is None:
        return
    if not _nonempty_str(ref.list_id) or not _is_int(ref.index) or ref.index < 0:
        raise FormatError(f"{where}.status_ref")


def validate_proof(proof: Any, where: str) -> None:
    if not isinstance(proof, ProofObject) or not isinstance(proof.kind, ProofKind):
        raise FormatError(f"{where}.proof")
    if not _nonempty_str(proof.key_id):
        raise FormatError(f"{where}.proof.key_id")
    if not isinstance(proof.signature, bytes) or not isinstance(proof.signed_payload, bytes):
        raise FormatError(f"{where}.proof")
    if proof.kind in (ProofKind.JWS_ED25519, ProofKind.SD_JWT):
        if len(proof.signature) != 64:
            raise FormatError(f"{where}.proof.signature")
        if not proof.signed_payload:
            raise FormatError(f"{where}.proof.signed_payload")
    elif proof.signed_payload:
        raise FormatError(f"{where}.proof.signed_payload")


def validate_credential(cred: Any, where: str = "credential") -> None:
    if not isinstance(cred, NormalizedCredential) or not isinstance(cred.source_format, SourceFormat):
        raise FormatError(f"{where}.source_format")
    for name in ("issuer", "subject"):
        if not _nonempty_str(getattr(cred, name)):
            raise FormatError(f"{where}.{name}")
    if not _is_int(cred.issued_at) or not _is_int(cred.expires_at):
        raise FormatError(f"{where}.validity")
    if cred.issued_at > cred.expires_at:
        raise FormatError(f"{where}.validity")
    if not isinstance(cred.claims, Mapping):
        raise FormatError(f"{where}.claims")
    for key, item in cred.claims.items():
        if not isinstance(key, str) or not (isinstance(item, str) or _is_int(item)):
            raise FormatError(f"{where}.claims")
    validate_status_ref(cred.status_ref, where)
    validate_proof(cred.proof, where)
    if cred.proof.kind not in ADMISSIBLE_PROOFS[cred.source_format]:
        raise FormatError(f"{where}.proof.kind")
    if not _is_int(cred.raw_size_bytes) or cred.raw_size_bytes < 0:
        raise FormatError(f"{where}.raw_size_bytes")


def validate_grant(dg: Any, where: str = "grant") -> None:
    if not isinstance(dg, DelegationGrant):
        raise FormatError(where)
    for name in ("grant_id", "issuer", "subject", "key_binding"):
        if not _nonempty_str(getattr(dg, name)):
            raise FormatError(f"{where}.{name}")
    if dg.issuer == dg.subject:
        raise FormatError(f"{where}.subject")
    validate_scope(dg.scope, where)
    if not _is_int(dg.not_before) or not _is_int(dg.not_after) or dg.not_before > dg.not_after:
        raise FormatError(f"{where}.validity")
    validate_status_ref(dg.status_ref, where)
    validate_proof(dg.proof, where)
    if dg.proof.kind not in (ProofKind.SD_JWT, ProofKind.LD_STUB):
        raise FormatError(f"{where}.proof.kind")
    if not isinstance(dg.constraints, Mapping) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in dg.constraints.items()
    ):
        raise FormatError(f"{where}.constraints")


def validate_policy(policy: Any) -> None:
    if not isinstance(policy, VerificationPolicy) or not _nonempty_str(policy.policy_id):
        raise FormatError("policy")
    if not _is_int(policy.max_chain_depth) or not 0 <= policy.max_chain_depth <= MAX_CHAIN_DEPTH:
        raise FormatError("policy.max_chain_depth")
    if not _is_int(policy.max_status_age_seconds) or policy.max_status_age_seconds <= 0:
        raise FormatError("policy.max_status_age_seconds")
    if not all(isinstance(t, SourceFormat) for t in policy.allowed_credential_types):
        raise FormatError("policy.allowed_credential_types")
    if policy.required_scope is not None:
        validate_scope(policy.required_scope, "policy.required_scope")


def validate_cvc(cvc: Any) -> None:
    """Check every type invariant of a context; raises ``FormatError``."""
    if not isinstance(cvc, CanonicalVerificationContext):
        raise FormatError("cvc")
    if not _nonempty_str(cvc.request_id):
        raise FormatError("request_id")
    if not _nonempty_str(cvc.subject_id):
        raise FormatError("subject_id")
    if not cvc.credentials:
        raise FormatError("credentials")
    for i, cred in enumerate(cvc.credentials):
        validate_credential(cred, f"credentials[{i}]")
    if cvc.presenter_proof is not None:
        validate_proof(cvc.presenter_proof, "presenter")
        if cvc.presenter_proof.kind is not ProofKind.JWS_ED25519:
            raise FormatError("presenter.proof.kind")
    seen = set()
    for i, dg in enumerate(cvc.chain):
        validate_grant(dg, f"chain[{i}]")
        if dg.grant_id in seen:
            raise FormatError(f"chain[{i}].grant_id")
        seen.add(dg.grant_id)
    validate_policy(cvc.policy)
    if not isinstance(cvc.status, StatusContext) or not _is_int(cvc.status.checked_at):
        raise FormatError("status")
    for res in cvc.status.resolutions:
        if not _is_int(res.document_issued_at) or res.document_issued_at > cvc.status.checked_at:
            raise FormatError("status.resolutions")
    if not isinstance(cvc.metadata, Mapping):
        raise FormatError("metadata")
