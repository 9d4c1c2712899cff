"""Deterministic verification core.

``verify`` runs seven fixed steps over a canonical verification context. The
first failing step decides the result code; the engine never aggregates
errors and never accepts an element it could not resolve.
"""

from __future__ import annotations

import collections
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Optional

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from .codes import OK, ErrorCode, FormatError, VerificationFailure
from .jose import ed25519_verify, private_key_from_seed, public_bytes, sign_compact
from .ledger import AnchorState, AnchorStore
from .model import (
    FLAG_NAMES,
    CanonicalVerificationContext,
    Clock,
    NormalizedCredential,
    ProofKind,
    ProofObject,
    StatusContext,
    VerificationPolicy,
    VerificationResultObject,
    canonical_serialize,
    chain_fingerprint,
    scope_contains,
    sha256_hex,
    validate_cvc,
)
from .trust_anchors import KeyRecord, ResolutionError, TrustRegistry, resolve_key

HOLDER_KEY_CLAIM = "holder_kid"
VRO_TYP = "vro+jwt"

# Each invariant flag is established once the named stage has completed.
_FLAG_STAGES = {
    "structural_validity": "structure",
    "signature_verification": "chain_signatures",
    "temporal_validity": "chain_temporal",
    "chain_integrity": "chain",
    "scope_containment": "policy",
}


class SignerError(Exception):
    pass


@dataclass(frozen=True)
class VerifierKey:
    key_id: str
    private_key: Ed25519PrivateKey

    @classmethod
    def from_seed(cls, key_id: str, seed: bytes) -> "VerifierKey":
        return cls(key_id, private_key_from_seed(seed))

    @property
    def public_key(self) -> bytes:
        return public_bytes(self.private_key)


@dataclass(frozen=True)
class SignedVRO:
    vro: VerificationResultObject
    jws: str
    payload: bytes

    @property
    def payload_hash(self) -> str:
        return sha256_hex(self.payload)


def _fail(code: ErrorCode, detail: str):
    raise VerificationFailure(code, detail)


def _check_proof(proof: ProofObject, record: KeyRecord, counters) -> bool:
    """Cryptographic check for JWS/SD-JWT; LD proofs pass on structure alone."""
    counters["signature_checks"] += 1
    if proof.kind is ProofKind.LD_STUB:
        return bool(proof.signature)
    return ed25519_verify(record.public_key, proof.signature, proof.signed_payload)


# -- steps ------------------------------------------------------------------


def validate_structure(cvc: CanonicalVerificationContext) -> None:
    validate_cvc(cvc)


def verify_credential(
    cred: NormalizedCredential,
    registry: TrustRegistry,
    clock: Clock,
    status: StatusContext,
    counters: Optional[collections.Counter] = None,
) -> None:
    counters = counters if counters is not None else collections.Counter()
    try:
        record = resolve_key(registry, cred.proof.key_id)
    except ResolutionError:
        _fail(ErrorCode.E200, "credential_key_unresolvable")
    if record.controller != cred.issuer:
        _fail(ErrorCode.E200, "credential_issuer_key_mismatch")
    if not _check_proof(cred.proof, record, counters):
        _fail(ErrorCode.E200, "credential_signature")
    if not cred.issued_at <= clock.now <= cred.expires_at:
        _fail(ErrorCode.E200, "credential_expired" if clock.now > cred.expires_at else "credential_not_yet_valid")
    if cred.status_ref is not None:
        res = status.find(cred.status_ref)
        if res is None:
            _fail(ErrorCode.E200, "credential_status_unresolved")
        if res.revoked:
            _fail(ErrorCode.E200, "credential_revoked")


def _subject_credential(cvc: CanonicalVerificationContext) -> Optional[NormalizedCredential]:
    for cred in cvc.credentials:
        if cred.subject == cvc.subject_id:
            return cred
    return None


def verify_presenter_binding(
    cvc: CanonicalVerificationContext,
    registry: TrustRegistry,
    counters: Optional[collections.Counter] = None,
) -> None:
    counters = counters if counters is not None else collections.Counter()
    if cvc.chain:
        expected = cvc.chain[-1].key_binding
    else:
        cred = _subject_credential(cvc)
        expected = cred.claims.get(HOLDER_KEY_CLAIM) if cred is not None else None
    if not isinstance(expected, str) or not expected:
        _fail(ErrorCode.E400, "presenter_key_unbound")
    declared = cvc.metadata.get("presenter_key_id")
    if declared is not None and declared != expected:
        _fail(ErrorCode.E400, "presenter_key_mismatch")
    try:
        record = resolve_key(registry, expected)
    except ResolutionError:
        _fail(ErrorCode.E400, "presenter_key_unresolvable")
    if record.controller != cvc.subject_id:
        _fail(ErrorCode.E400, "presenter_controller_mismatch")
    proof = cvc.presenter_proof
    if proof is not None:
        if proof.key_id != expected or proof.signed_payload != cvc.request_id.encode("utf-8"):
            _fail(ErrorCode.E400, "presenter_proof_binding")
        if not _check_proof(proof, record, counters):
            _fail(ErrorCode.E400, "presenter_signature")


def evaluate_chain(
    cvc: CanonicalVerificationContext,
    registry: TrustRegistry,
    ledger: Optional[AnchorStore],
    clock: Clock,
    counters: Optional[collections.Counter] = None,
    stages: Optional[set] = None,
) -> Optional[str]:
    """Check the delegation chain; return its fingerprint when anchoring ran."""
    counters = counters if counters is not None else collections.Counter()
    stages = stages if stages is not None else set()
    chain, policy = cvc.chain, cvc.policy
    if not chain:
        stages.update({"chain_signatures", "chain_temporal", "chain"})
        return None

    # continuity and root of authority
    for prev, nxt in zip(chain, chain[1:]):
        if nxt.issuer != prev.subject:
            _fail(ErrorCode.E300, "chain_discontinuity")
    if chain[-1].subject != cvc.subject_id:
        _fail(ErrorCode.E300, "chain_terminal_subject")
    root = chain[0].issuer
    if root not in registry.trust_roots and root not in {c.subject for c in cvc.credentials}:
        _fail(ErrorCode.E300, "chain_untrusted_root")
    # acyclicity
    pairs = [(dg.issuer, dg.subject) for dg in chain]
    if len(set(pairs)) != len(pairs):
        _fail(ErrorCode.E300, "chain_cycle")
    if len(chain) > policy.max_chain_depth:
        _fail(ErrorCode.E300, "chain_too_deep")
    for dg in chain:
        try:
            record = resolve_key(registry, dg.proof.key_id)
        except ResolutionError:
            _fail(ErrorCode.E300, "grant_key_unresolvable")
        if record.controller != dg.issuer:
            _fail(ErrorCode.E300, "grant_issuer_key_mismatch")
        if not _check_proof(dg.proof, record, counters):
            _fail(ErrorCode.E300, "grant_signature")
    stages.add("chain_signatures")
    for dg in chain:
        if clock.now < dg.not_before:
            _fail(ErrorCode.E400, "grant_not_yet_valid")
        if clock.now > dg.not_after:
            _fail(ErrorCode.E400, "grant_expired")
    stages.add("chain_temporal")
    for dg in chain:
        if dg.status_ref is None:
            continue
        res = cvc.status.find(dg.status_ref)
        if res is None:
            _fail(ErrorCode.E400, "grant_status_unresolved")
        if res.revoked:
            _fail(ErrorCode.E400, "grant_revoked")
        if clock.now - res.document_issued_at > policy.max_status_age_seconds:
            _fail(ErrorCode.E400, "grant_status_stale")
    for parent, child in zip(chain, chain[1:]):
        if not scope_contains(parent.scope, child.scope):
            _fail(ErrorCode.E400, "scope_escalation")
    fingerprint = None
    if policy.require_anchor:
        fingerprint = chain_fingerprint(chain)
        if ledger is None:
            _fail(ErrorCode.E300, "anchor_store_unavailable")
        counters["ledger_lookups"] += 1
        state = ledger.lookup(fingerprint, clock)
        if state is not AnchorState.ACTIVE:
            raise _AnchorFailure(fingerprint, state)
    stages.add("chain")
    return fingerprint


class _AnchorFailure(VerificationFailure):
    def __init__(self, fingerprint: str, state: AnchorState):
        super().__init__(ErrorCode.E300, f"anchor_{state.value.lower()}")
        self.fingerprint = fingerprint


def check_status_freshness(cvc: CanonicalVerificationContext, clock: Clock) -> None:
    window = cvc.policy.max_status_age_seconds
    for cred in cvc.credentials:
        if cred.status_ref is None:
            continue
        res = cvc.status.find(cred.status_ref)
        if res is None:
            _fail(ErrorCode.E200, "credential_status_unresolved")
        if clock.now - res.document_issued_at > window:
            _fail(ErrorCode.E200, "credential_status_stale")
    for dg in cvc.chain:
        if dg.status_ref is None:
            continue
        res = cvc.status.find(dg.status_ref)
        if res is None:
            _fail(ErrorCode.E400, "grant_status_unresolved")
        if clock.now - res.document_issued_at > window:
            _fail(ErrorCode.E400, "grant_status_stale")


def enforce_policy(cvc: CanonicalVerificationContext, clock: Clock) -> None:
    policy: VerificationPolicy = cvc.policy
    for cred in cvc.credentials:
        if cred.issuer not in policy.trusted_issuers:
            _fail(ErrorCode.E500, "untrusted_issuer")
        if cred.source_format not in policy.allowed_credential_types:
            _fail(ErrorCode.E500, "credential_type_not_allowed")
    if policy.required_scope is not None:
        effective = cvc.chain[-1].scope if cvc.chain else None
        if effective is None or not scope_contains(effective, policy.required_scope):
            _fail(ErrorCode.E500, "required_scope_not_granted")


def sign_vro(vro: VerificationResultObject, signer: Optional[VerifierKey]) -> SignedVRO:
    if signer is None or not isinstance(signer, VerifierKey):
        raise SignerError("verifier signing key is not configured")
    payload = canonical_serialize(vro)
    header = {"alg": "EdDSA", "kid": signer.key_id, "typ": VRO_TYP}
    return SignedVRO(vro, sign_compact(header, payload, signer.private_key), payload)


# -- pipeline ---------------------------------------------------------------


def _flags(stages: set) -> dict:
    return {name: _FLAG_STAGES[name] in stages for name in FLAG_NAMES}


def verify(
    cvc: CanonicalVerificationContext,
    registry: TrustRegistry,
    ledger: Optional[AnchorStore],
    clock: Clock,
    signer: VerifierKey,
    counters: Optional[collections.Counter] = None,
) -> SignedVRO:
    """Run the full pipeline and return the signed result object.

    ``counters`` (a ``collections.Counter``) receives ``signature_checks`` and
    ``ledger_lookups``; it only observes and never influences the outcome.
    """
    if signer is None:
        raise SignerError("verifier signing key is not configured")
    counters = counters if counters is not None else collections.Counter()
    stages: set = set()
    fingerprint = None
    result, detail = OK, "ok"
    try:
        cvc_hash = sha256_hex(canonical_serialize(cvc))
    except TypeError:
        cvc_hash = sha256_hex(b"")
    try:
        validate_structure(cvc)
        stages.add("structure")
        for cred in cvc.credentials:
            verify_credential(cred, registry, clock, cvc.status, counters)
        verify_presenter_binding(cvc, registry, counters)
        fingerprint = evaluate_chain(cvc, registry, ledger, clock, counters, stages)
        check_status_freshness(cvc, clock)
        enforce_policy(cvc, clock)
        stages.add("policy")
    except _AnchorFailure as failure:
        fingerprint = failure.fingerprint
        result, detail = failure.code.value, failure.detail
    except VerificationFailure as failure:
        result, detail = failure.code.value, failure.detail
    except (TypeError, AttributeError, KeyError):
        # a context that does not even have the canonical shape
        result, detail = ErrorCode.E100.value, "cvc"
    ok = result == OK
    vro = VerificationResultObject(
        request_id=cvc.request_id if isinstance(getattr(cvc, "request_id", None), str) else "",
        result=result,
        detail=detail,
        profile=str(_metadata(cvc).get("profile", "")),
        cvc_hash=cvc_hash,
        chain_fingerprint=fingerprint,
        effective_scope=cvc.chain[-1].scope if ok and cvc.chain else None,
        invariant_flags=_flags(stages),
        checked_at=clock.now,
        policy_id=getattr(getattr(cvc, "policy", None), "policy_id", "") or "",
    )
    return sign_vro(vro, signer)


def _metadata(cvc) -> dict:
    meta = getattr(cvc, "metadata", None)
    return meta if isinstance(meta, Mapping) else {}


def reject_unparsed(
    request_id: str,
    failure: FormatError,
    clock: Clock,
    signer: VerifierKey,
    *,
    input_hash: str,
    profile: str = "",
    policy_id: str = "",
) -> SignedVRO:
    """Signed E100 result for input that never became a context."""
    vro = VerificationResultObject(
        request_id=request_id,
        result=failure.code.value,
        detail=failure.detail,
        profile=profile,
        cvc_hash=input_hash,
        chain_fingerprint=None,
        effective_scope=None,
        invariant_flags=_flags(set()),
        checked_at=clock.now,
        policy_id=policy_id,
    )
    return sign_vro(vro, signer)
