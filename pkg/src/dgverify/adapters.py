"""Inbound adapters: profile detection and native-format parsing.

Adapters map VC-JWT, VC-LD, SD-JWT grants, LD grants and OIDC4VP envelopes onto
the canonical types. They never check signatures; they only carry the exact
signed bytes forward for the engine.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Any, Optional, Union

from .codes import FormatError
from .jose import JoseError, decode_compact, disclosure_digest, looks_compact
from .model import (
    DelegationGrant,
    NormalizedCredential,
    Profile,
    ProofKind,
    ProofObject,
    Scope,
    SourceFormat,
    StatusRef,
    b64url_decode,
    canonical_serialize,
    validate_credential,
    validate_grant,
)

Artifact = Union[str, dict]

VC_JWT_CLAIMS = frozenset({"iss", "sub", "iat", "exp", "status", "vc"})
DG_CLAIMS = frozenset({"jti", "iss", "sub", "scope", "nbf", "exp", "kb", "status", "cst"})
DG_REQUIRED = ("jti", "iss", "sub", "scope", "nbf", "exp", "kb", "cst")
LD_DG_ENVELOPE = frozenset({"@context", "type", "proof"})


@dataclass(frozen=True)
class VerificationRequest:
    request_id: str
    presentation: Any
    chain_tokens: tuple = ()
    policy_id: str = ""
    presenter_key_id: Optional[str] = None
    presenter_signature: Optional[str] = None

    @classmethod
    def from_json(cls, body: Any) -> "VerificationRequest":
        if not isinstance(body, dict):
            raise FormatError("request")
        request_id = body.get("request_id")
        if not isinstance(request_id, str) or not request_id:
            raise FormatError("request_id")
        policy_id = body.get("policy_id")
        if not isinstance(policy_id, str) or not policy_id:
            raise FormatError("policy_id")
        if "presentation" not in body:
            raise FormatError("presentation")
        chain = body.get("chain_tokens") or []
        if not isinstance(chain, list):
            raise FormatError("chain_tokens")
        key_id = body.get("presenter_key_id")
        signature = body.get("presenter_signature")
        if key_id is not None and not isinstance(key_id, str):
            raise FormatError("presenter_key_id")
        if signature is not None and (not isinstance(signature, str) or key_id is None):
            raise FormatError("presenter_signature")
        return cls(request_id, body["presentation"], tuple(chain), policy_id, key_id, signature)


# -- shape detection --------------------------------------------------------


def is_vc_ld(artifact: Any) -> bool:
    return isinstance(artifact, dict) and "@context" in artifact and "credentialSubject" in artifact


def is_ld_grant(artifact: Any) -> bool:
    if not isinstance(artifact, dict) or "@context" not in artifact:
        return False
    types = artifact.get("type")
    return isinstance(types, list) and "DelegationGrant" in types


def is_sd_jwt(artifact: Any) -> bool:
    return isinstance(artifact, str) and looks_compact(artifact.split("~", 1)[0])


def detect_profile(request: VerificationRequest) -> Profile:
    pres = request.presentation
    if looks_compact(pres):
        pres_kind = "jose"
    elif is_vc_ld(pres):
        pres_kind = "ld"
    else:
        raise FormatError("presentation_shape")
    kinds = set()
    for token in request.chain_tokens:
        if is_sd_jwt(token):
            kinds.add("jose")
        elif is_ld_grant(token):
            kinds.add("ld")
        else:
            raise FormatError("grant_shape")
    if kinds <= {pres_kind}:
        return Profile.FEDERATED if pres_kind == "jose" else Profile.SSI
    return Profile.HYBRID


# -- field helpers ----------------------------------------------------------


def _int(value: Any, name: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise FormatError(name)
    return value


def _str(value: Any, name: str) -> str:
    if not isinstance(value, str) or not value:
        raise FormatError(name)
    return value


def _timestamp(value: Any, name: str) -> int:
    if isinstance(value, str):
        try:
            dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
        except ValueError:
            raise FormatError(name) from None
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return int(dt.timestamp())
    return _int(value, name)


def _status(value: Any) -> Optional[StatusRef]:
    if value is None:
        return None
    if not isinstance(value, dict):
        raise FormatError("status")
    return StatusRef(_str(value.get("list"), "status.list"), _int(value.get("idx"), "status.idx"))


def _flat_claims(values: dict, name: str) -> dict:
    for key, item in values.items():
        if not (isinstance(item, str) or (isinstance(item, int) and not isinstance(item, bool))):
            raise FormatError(f"{name}.{key}")
    return dict(values)


def _jose(token: str):
    try:
        return decode_compact(token)
    except JoseError as exc:
        raise FormatError(str(exc)) from None


def _raw_size(artifact: Artifact) -> int:
    if isinstance(artifact, str):
        return len(artifact.encode("utf-8"))
    return len(canonical_serialize(artifact))


# -- credentials ------------------------------------------------------------


def parse_vc_jwt(token: str) -> NormalizedCredential:
    if not looks_compact(token):
        raise FormatError("vc_jwt_shape")
    jws = _jose(token)
    claims = jws.payload
    vc = claims.get("vc", {})
    if not isinstance(vc, dict):
        raise FormatError("vc")
    extra = {k: v for k, v in claims.items() if k not in VC_JWT_CLAIMS}
    if set(extra) & set(vc):
        raise FormatError("claims")
    cred = NormalizedCredential(
        source_format=SourceFormat.VC_JWT,
        issuer=_str(claims.get("iss"), "iss"),
        subject=_str(claims.get("sub"), "sub"),
        claims=_flat_claims({**vc, **extra}, "claims"),
        issued_at=_int(claims.get("iat"), "iat"),
        expires_at=_int(claims.get("exp"), "exp"),
        status_ref=_status(claims.get("status")),
        proof=ProofObject(
            ProofKind.JWS_ED25519, jws.header["kid"], jws.signature, jws.signing_input
        ),
        raw_size_bytes=_raw_size(token),
    )
    validate_credential(cred)
    return cred


def _ld_proof(doc: dict) -> ProofObject:
    proof = doc.get("proof")
    if not isinstance(proof, dict):
        raise FormatError("proof")
    method = _str(proof.get("verificationMethod"), "proof.verificationMethod")
    try:
        signature = b64url_decode(_str(proof.get("proofValue"), "proof.proofValue"))
    except ValueError:
        raise FormatError("proof.proofValue") from None
    return ProofObject(ProofKind.LD_STUB, method, signature, b"")


def parse_vc_ld(doc: dict) -> NormalizedCredential:
    if not is_vc_ld(doc):
        raise FormatError("vc_ld_shape")
    issuer = doc.get("issuer")
    if isinstance(issuer, dict):
        issuer = issuer.get("id")
    subject_doc = doc.get("credentialSubject")
    if not isinstance(subject_doc, dict):
        raise FormatError("credentialSubject")
    subject = _str(subject_doc.get("id"), "credentialSubject.id")
    if "issuanceDate" not in doc or "expirationDate" not in doc:
        raise FormatError("validity")
    status_ref = None
    entry = doc.get("credentialStatus")
    if entry is not None:
        if not isinstance(entry, dict):
            raise FormatError("credentialStatus")
        index = entry.get("statusListIndex")
        if isinstance(index, str) and index.isdigit():
            index = int(index)
        status_ref = StatusRef(
            _str(entry.get("statusListCredential"), "credentialStatus.statusListCredential"),
            _int(index, "credentialStatus.statusListIndex"),
        )
    claims = {k: v for k, v in subject_doc.items() if k != "id"}
    cred = NormalizedCredential(
        source_format=SourceFormat.VC_LD,
        issuer=_str(issuer, "issuer"),
        subject=subject,
        claims=_flat_claims(claims, "credentialSubject"),
        issued_at=_timestamp(doc["issuanceDate"], "issuanceDate"),
        expires_at=_timestamp(doc["expirationDate"], "expirationDate"),
        status_ref=status_ref,
        proof=_ld_proof(doc),
        raw_size_bytes=_raw_size(doc),
    )
    validate_credential(cred)
    return cred


# -- delegation grants ------------------------------------------------------


def _grant_from_claims(claims: dict, proof: ProofObject) -> DelegationGrant:
    for name in DG_REQUIRED:
        if name not in claims:
            raise FormatError(name)
    scope = claims["scope"]
    if not isinstance(scope, list) or not all(isinstance(s, str) for s in scope):
        raise FormatError("scope")
    if len(set(scope)) != len(scope):
        raise FormatError("scope")
    constraints = claims["cst"]
    if not isinstance(constraints, dict):
        raise FormatError("cst")
    constraints = dict(constraints)
    for key, value in claims.items():
        if key in DG_CLAIMS:
            continue
        if key in constraints:
            raise FormatError("cst")
        constraints[key] = value if isinstance(value, str) else json.dumps(
            value, sort_keys=True, separators=(",", ":")
        )
    grant = DelegationGrant(
        grant_id=_str(claims["jti"], "jti"),
        issuer=_str(claims["iss"], "iss"),
        subject=_str(claims["sub"], "sub"),
        scope=Scope(frozenset(scope)),
        not_before=_int(claims["nbf"], "nbf"),
        not_after=_int(claims["exp"], "exp"),
        key_binding=_str(claims["kb"], "kb"),
        status_ref=_status(claims.get("status")),
        proof=proof,
        constraints=constraints,
    )
    validate_grant(grant)
    return grant


def parse_dg_sd_jwt(token: str) -> DelegationGrant:
    if not is_sd_jwt(token):
        raise FormatError("sd_jwt_shape")
    jws_part, *disclosures = token.split("~")
    if disclosures and disclosures[-1] == "":
        disclosures.pop()
    jws = _jose(jws_part)
    payload = dict(jws.payload)
    digests = payload.pop("_sd", [])
    alg = payload.pop("_sd_alg", "sha-256")
    if alg != "sha-256" or not isinstance(digests, list):
        raise FormatError("_sd")
    seen = set()
    for disclosure in disclosures:
        if not disclosure:
            raise FormatError("disclosure")
        try:
            decoded = json.loads(b64url_decode(disclosure))
        except (ValueError, UnicodeDecodeError):
            raise FormatError("disclosure") from None
        if not (isinstance(decoded, list) and len(decoded) == 3 and isinstance(decoded[1], str)):
            raise FormatError("disclosure")
        digest = disclosure_digest(disclosure)
        if digest not in digests or digest in seen:
            raise FormatError("disclosure_digest")
        seen.add(digest)
        _, name, value = decoded
        if name in payload or name in ("_sd", "_sd_alg"):
            raise FormatError("disclosure_claim")
        payload[name] = value
    proof = ProofObject(ProofKind.SD_JWT, jws.header["kid"], jws.signature, jws.signing_input)
    return _grant_from_claims(payload, proof)


def parse_dg_ld(doc: dict) -> DelegationGrant:
    if not is_ld_grant(doc):
        raise FormatError("ld_grant_shape")
    claims = {k: v for k, v in doc.items() if k not in LD_DG_ENVELOPE}
    return _grant_from_claims(claims, _ld_proof(doc))


def parse_grant(artifact: Artifact) -> DelegationGrant:
    if is_sd_jwt(artifact):
        return parse_dg_sd_jwt(artifact)
    if is_ld_grant(artifact):
        return parse_dg_ld(artifact)
    raise FormatError("grant_shape")


def parse_credential(artifact: Artifact) -> NormalizedCredential:
    if looks_compact(artifact):
        return parse_vc_jwt(artifact)
    if is_vc_ld(artifact):
        return parse_vc_ld(artifact)
    raise FormatError("presentation_shape")


def extract_vp_token(envelope: Any) -> Artifact:
    if not isinstance(envelope, dict):
        raise FormatError("envelope")
    if "vp_token" not in envelope or envelope["vp_token"] in (None, ""):
        raise FormatError("vp_token")
    return envelope["vp_token"]


def artifact_size(artifact: Artifact) -> int:
    return _raw_size(artifact)
