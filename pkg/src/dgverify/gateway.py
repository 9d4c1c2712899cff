"""Trust gateway: protocol detection, normalization and the HTTP surface."""

from __future__ import annotations

import collections
import hashlib
import json
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import engine
from .adapters import (
    VerificationRequest,
    artifact_size,
    detect_profile,
    extract_vp_token,
    parse_credential,
    parse_grant,
)
from .codes import FormatError
from .ledger import AnchorStore
from .model import (
    CanonicalVerificationContext,
    Clock,
    Profile,
    ProofKind,
    ProofObject,
    SourceFormat,
    StatusContext,
    StatusResolution,
    VerificationPolicy,
    b64url_decode,
    canonical_serialize,
    to_canonical,
    validate_policy,
)
from .trust_anchors import ResolutionError, TrustRegistry, load_registry, resolve_status

log = logging.getLogger(__name__)

CLOCK_HEADER = "x-verifier-clock"
CAPABILITIES_PATH = "/.well-known/verifier-capabilities"


class ConfigError(Exception):
    pass


class UnknownPolicy(LookupError):
    pass


def load_policies(directory) -> dict[str, VerificationPolicy]:
    policies: dict[str, VerificationPolicy] = {}
    paths = sorted(Path(directory).glob("*.json"))
    if not paths:
        raise ConfigError(f"no policies in {directory}")
    for path in paths:
        try:
            policy = VerificationPolicy.from_dict(json.loads(path.read_text(encoding="utf-8")))
            validate_policy(policy)
        except (OSError, ValueError, KeyError, TypeError, FormatError) as exc:
            raise ConfigError(f"invalid policy file {path.name}: {exc}") from exc
        if policy.policy_id in policies:
            raise ConfigError(f"duplicate policy {policy.policy_id}")
        policies[policy.policy_id] = policy
    return policies


def load_signing_key(path) -> engine.VerifierKey:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        seed = b64url_decode(data["seed"])
        if len(seed) != 32:
            raise ValueError("seed must be 32 bytes")
        return engine.VerifierKey.from_seed(data["key_id"], seed)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot load verifier signing key: {exc}") from exc


@dataclass
class GatewayConfig:
    registry: TrustRegistry
    policies: dict[str, VerificationPolicy]
    signer: engine.VerifierKey
    ledger: Optional[AnchorStore] = None
    fixed_clock: Optional[int] = None
    allow_clock_override: bool = False
    metrics_path: Optional[Path] = None

    @classmethod
    def from_paths(
        cls,
        registry,
        policies,
        signing_key,
        ledger=None,
        **kwargs,
    ) -> "GatewayConfig":
        try:
            reg = load_registry(registry)
        except Exception as exc:
            raise ConfigError(str(exc)) from exc
        store = None
        if ledger is not None:
            try:
                store = AnchorStore(ledger)
            except Exception as exc:
                raise ConfigError(f"cannot load ledger: {exc}") from exc
        config = cls(reg, load_policies(policies), load_signing_key(signing_key), store, **kwargs)
        config.check()
        return config

    def check(self) -> None:
        key = self.registry.keys.get(self.signer.key_id)
        if key is None or key.public_key != self.signer.public_key:
            raise ConfigError("verifier key is not registered in the trust registry")


@dataclass
class GatewayResult:
    status_code: int
    body: dict
    cvc: Optional[CanonicalVerificationContext] = None
    signed: Optional[engine.SignedVRO] = None


@dataclass
class _Timer:
    start: float = field(default_factory=time.perf_counter)

    def ms(self) -> float:
        return (time.perf_counter() - self.start) * 1000.0


def _raw_hash(body: Any) -> str:
    text = json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=False, default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class TrustGateway:
    def __init__(self, config: GatewayConfig):
        self.config = config
        self._metrics_lock = threading.Lock()

    # -- configuration views -------------------------------------------

    def capabilities(self) -> dict:
        return {
            "supported_profiles": [p.value for p in Profile],
            "supported_formats": [f.value for f in SourceFormat],
            "supported_proof_kinds": [k.value for k in ProofKind],
            "holder_binding": ["key_binding", "presenter_signature"],
            "policy_ids": sorted(self.config.policies),
            "verifier_key_id": self.config.signer.key_id,
            "endpoints": ["/verify", "/verify/oidc4vp", "/health", CAPABILITIES_PATH],
        }

    def health(self) -> dict:
        return {
            "status": "ok",
            "registry_loaded": self.config.registry is not None,
            "ledger_loaded": self.config.ledger is not None,
        }

    def clock_for(self, override: Optional[str] = None) -> Clock:
        if override is not None and self.config.allow_clock_override:
            return Clock(int(override))
        if self.config.fixed_clock is not None:
            return Clock(self.config.fixed_clock)
        return Clock(int(time.time()))

    # -- normalization --------------------------------------------------

    def policy(self, policy_id: str) -> VerificationPolicy:
        try:
            return self.config.policies[policy_id]
        except KeyError:
            raise UnknownPolicy(policy_id) from None

    def _status_context(self, refs, clock: Clock) -> StatusContext:
        registry = self.config.registry
        resolutions = {}
        for ref in refs:
            if ref is None or (ref.list_id, ref.index) in resolutions:
                continue
            try:
                bit = resolve_status(registry, ref.list_id, ref.index)
            except ResolutionError:
                continue  # left unresolved; the engine fails closed on it
            doc = registry.status_docs[ref.list_id]
            resolutions[(ref.list_id, ref.index)] = StatusResolution(
                ref.list_id, ref.index, bit, doc.issued_at
            )
        return StatusContext(clock.now, tuple(resolutions[k] for k in sorted(resolutions)))

    def build_cvc(
        self, request: VerificationRequest, profile: Profile, clock: Clock
    ) -> CanonicalVerificationContext:
        cred = parse_credential(request.presentation)
        chain = tuple(parse_grant(token) for token in request.chain_tokens)
        policy = self.policy(request.policy_id)
        presenter_proof = None
        if request.presenter_signature is not None:
            try:
                signature = b64url_decode(request.presenter_signature)
            except ValueError:
                raise FormatError("presenter_signature") from None
            presenter_proof = ProofObject(
                ProofKind.JWS_ED25519,
                request.presenter_key_id,
                signature,
                request.request_id.encode("utf-8"),
            )
        metadata: dict[str, Any] = {
            "profile": profile.value,
            "submitted_at": clock.now,
            "source_sizes": {
                "presentation": artifact_size(request.presentation),
                "chain": sum(artifact_size(t) for t in request.chain_tokens),
            },
        }
        if request.presenter_key_id is not None:
            metadata["presenter_key_id"] = request.presenter_key_id
        refs = [cred.status_ref] + [dg.status_ref for dg in chain]
        return CanonicalVerificationContext(
            request_id=request.request_id,
            issuer_ids=frozenset({cred.issuer} | {dg.issuer for dg in chain}),
            subject_id=chain[-1].subject if chain else cred.subject,
            credentials=(cred,),
            presenter_proof=presenter_proof,
            chain=chain,
            policy=policy,
            status=self._status_context(refs, clock),
            metadata=metadata,
        )

    # -- request handling ----------------------------------------------

    def handle_verify(self, body: Any, clock: Clock) -> GatewayResult:
        total = _Timer()
        request_id = body.get("request_id", "") if isinstance(body, dict) else ""
        request_id = request_id if isinstance(request_id, str) else ""
        policy_id = body.get("policy_id", "") if isinstance(body, dict) else ""
        policy_id = policy_id if isinstance(policy_id, str) else ""
        if policy_id and policy_id not in self.config.policies:
            return GatewayResult(404, {"error": "unknown_policy", "policy_id": policy_id})
        profile = None
        normalize = _Timer()
        try:
            request = VerificationRequest.from_json(body)
            profile = detect_profile(request)
            cvc = self.build_cvc(request, profile, clock)
        except FormatError as failure:
            signed = engine.reject_unparsed(
                request_id,
                failure,
                clock,
                self.config.signer,
                input_hash=_raw_hash(body),
                profile=profile.value if profile else "",
                policy_id=policy_id,
            )
            return self._respond(signed, None, body, total, normalize.ms(), 0.0, collections.Counter())
        t_normalize = normalize.ms()
        counters: collections.Counter = collections.Counter()
        verify = _Timer()
        signed = engine.verify(cvc, self.config.registry, self.config.ledger, clock, self.config.signer, counters)
        t_verify = verify.ms()
        return self._respond(signed, cvc, body, total, t_normalize, t_verify, counters, request)

    def handle_verify_oidc4vp(self, body: Any, clock: Clock) -> GatewayResult:
        if not isinstance(body, dict):
            return GatewayResult(400, {"error": "malformed_envelope"})
        inner = {k: v for k, v in body.items() if k not in ("vp_token", "presentation_submission", "state")}
        try:
            inner["presentation"] = extract_vp_token(body)
        except FormatError as failure:
            policy_id = inner.get("policy_id") if isinstance(inner.get("policy_id"), str) else ""
            if policy_id and policy_id not in self.config.policies:
                return GatewayResult(404, {"error": "unknown_policy", "policy_id": policy_id})
            request_id = inner.get("request_id") if isinstance(inner.get("request_id"), str) else ""
            signed = engine.reject_unparsed(
                request_id, failure, clock, self.config.signer,
                input_hash=_raw_hash(body), policy_id=policy_id,
            )
            return self._respond(signed, None, body, _Timer(), 0.0, 0.0, collections.Counter())
        return self.handle_verify(inner, clock)

    def _respond(self, signed, cvc, body, total, t_normalize, t_verify, counters, request=None):
        cvc_bytes = canonical_serialize(cvc) if cvc is not None else b""
        chain = request.chain_tokens if request is not None else ()
        metrics = {
            "request_id": signed.vro.request_id,
            "profile": signed.vro.profile,
            "depth": len(cvc.chain) if cvc is not None else 0,
            "anchored": bool(cvc is not None and cvc.policy.require_anchor),
            "result": signed.vro.result,
            "t_normalize_ms": t_normalize,
            "t_verify_ms": t_verify,
            "t_server_ms": total.ms(),
            "size_input_bytes": artifact_size(request.presentation) if request is not None else 0,
            "size_cvc_bytes": len(cvc_bytes),
            "size_vro_bytes": len(signed.jws),
            "size_vro_payload_bytes": len(signed.payload),
            "size_chain_bytes": sum(artifact_size(t) for t in chain),
            "signature_checks": counters["signature_checks"],
            "ledger_lookups": counters["ledger_lookups"],
            "invariant_flags": dict(signed.vro.invariant_flags),
        }
        self._sink(metrics)
        payload = to_canonical(signed.vro)
        response = {
            "vro_jws": signed.jws,
            "payload": payload,
            "payload_hash": signed.payload_hash,
            "metrics": metrics,
        }
        return GatewayResult(200, response, cvc, signed)

    def _sink(self, metrics: dict) -> None:
        path = self.config.metrics_path
        if path is None:
            return
        line = json.dumps(metrics, sort_keys=True) + "\n"
        with self._metrics_lock, open(path, "a", encoding="utf-8") as fh:
            fh.write(line)


def create_app(gateway: TrustGateway) -> FastAPI:
    app = FastAPI(title="dgverify trust gateway")
    app.state.gateway = gateway

    async def _body(request: Request):
        raw = await request.body()
        try:
            return json.loads(raw)
        except (ValueError, UnicodeDecodeError):
            return _UNPARSEABLE

    def _clock(request: Request) -> Clock:
        header = request.headers.get(CLOCK_HEADER)
        try:
            return gateway.clock_for(header)
        except ValueError:
            return gateway.clock_for(None)

    @app.post("/verify")
    async def verify(request: Request):
        body = await _body(request)
        if body is _UNPARSEABLE:
            return JSONResponse({"error": "body is not JSON"}, status_code=400)
        result = gateway.handle_verify(body, _clock(request))
        return JSONResponse(result.body, status_code=result.status_code)

    @app.post("/verify/oidc4vp")
    async def verify_oidc4vp(request: Request):
        body = await _body(request)
        if body is _UNPARSEABLE:
            return JSONResponse({"error": "body is not JSON"}, status_code=400)
        result = gateway.handle_verify_oidc4vp(body, _clock(request))
        return JSONResponse(result.body, status_code=result.status_code)

    @app.get("/health")
    async def health():
        return gateway.health()

    @app.get(CAPABILITIES_PATH)
    async def capabilities():
        return gateway.capabilities()

    return app


_UNPARSEABLE = object()
