"""Seeded fixture corpus: keys, registry, credentials, grant chains, policies,
anchors, and the scenario request cases (positive and mutated negatives)."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from ..jose import disclosure_digest, make_disclosure, private_key_from_seed, public_bytes, sign_compact
from ..ledger import AnchorStore
from ..model import Clock, b64url_decode, b64url_encode, canonical_serialize
from ..trust_anchors import ED25519, encode_status_list

FIXTURE_EPOCH = 1_767_225_600  # 2026-01-01T00:00:00Z; the fixed verification clock
DAY = 86_400

ISSUER = "did:example:issuer-1"
UNTRUSTED_ISSUER = "did:example:issuer-2"
HOLDERS = ("did:example:alice", "did:example:bob", "did:example:carol")
AGENTS = ("did:example:agent-1", "did:example:agent-2", "did:example:agent-3")
VERIFIER = "did:example:verifier"
ROGUE = "did:example:rogue"

ISSUER_KEY = f"{ISSUER}#key-1"
RETIRED_ISSUER_KEY = f"{ISSUER}#key-0"
UNTRUSTED_KEY = f"{UNTRUSTED_ISSUER}#key-1"
VERIFIER_KEY = f"{VERIFIER}#key-1"
ROGUE_KEY = f"{ROGUE}#key-1"

CRED_LIST = "https://status.example/credentials/1"
GRANT_LIST = "https://status.example/grants/1"
CRED_ARCHIVE = "https://status.example/credentials/archive"
GRANT_ARCHIVE = "https://status.example/grants/archive"
REVOKED_CRED_INDEX = 3
REVOKED_GRANT_INDEX = 7
STATUS_MAX_AGE = 300

CHAIN_SCOPES = (
    ["calendar:read", "doc:read", "doc:write"],
    ["calendar:read", "doc:read"],
    ["doc:read"],
)
LD_CONTEXT = ["https://www.w3.org/2018/credentials/v1"]
DG_CONTEXT = ["https://www.w3.org/2018/credentials/v1", "https://w3id.org/delegation/v1"]

POLICIES = {
    "permissive": dict(trusted_issuers=[ISSUER], allowed_credential_types=["VC_JWT", "VC_LD"], max_chain_depth=3),
    "strict-issuer": dict(trusted_issuers=[ISSUER], allowed_credential_types=["VC_JWT"], max_chain_depth=3),
    "anchor-required": dict(
        trusted_issuers=[ISSUER], allowed_credential_types=["VC_JWT", "VC_LD"], max_chain_depth=3, require_anchor=True
    ),
    "shallow-depth": dict(trusted_issuers=[ISSUER], allowed_credential_types=["VC_JWT", "VC_LD"], max_chain_depth=1),
    "requires-doc-write": dict(
        trusted_issuers=[ISSUER],
        allowed_credential_types=["VC_JWT", "VC_LD"],
        max_chain_depth=3,
        required_scope=["doc:write"],
    ),
}


def key_id(did: str) -> str:
    return f"{did}#key-1"


def short(did: str) -> str:
    return did.rsplit(":", 1)[-1]


def iso(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


class Keyring:
    """Ed25519 keys derived deterministically from one seed."""

    ORDER = (
        ISSUER_KEY,
        RETIRED_ISSUER_KEY,
        UNTRUSTED_KEY,
        *(key_id(h) for h in HOLDERS),
        *(key_id(a) for a in AGENTS),
        VERIFIER_KEY,
        ROGUE_KEY,
    )

    def __init__(self, rng: random.Random):
        self.seeds = {kid: rng.randbytes(32) for kid in self.ORDER}
        self._keys = {kid: private_key_from_seed(seed) for kid, seed in self.seeds.items()}

    @classmethod
    def from_json(cls, data: dict) -> "Keyring":
        ring = cls.__new__(cls)
        ring.seeds = {kid: b64url_decode(seed) for kid, seed in data.items()}
        ring._keys = {kid: private_key_from_seed(seed) for kid, seed in ring.seeds.items()}
        return ring

    def to_json(self) -> dict:
        return {kid: b64url_encode(seed) for kid, seed in self.seeds.items()}

    def __getitem__(self, kid: str):
        return self._keys[kid]

    def sign(self, kid: str, message: bytes) -> bytes:
        return self._keys[kid].sign(message)


def controller_of(kid: str) -> str:
    return kid.split("#", 1)[0]


# -- artifact builders ------------------------------------------------------


def vc_jwt(ring: Keyring, kid: str, iss: str, sub: str, claims: dict, status, iat: int, exp: int, **extra) -> str:
    payload = {"iss": iss, "sub": sub, "iat": iat, "exp": exp, "vc": claims, **extra}
    if status is not None:
        payload["status"] = {"list": status[0], "idx": status[1]}
    header = {"alg": "EdDSA", "kid": kid, "typ": "vc+jwt"}
    return sign_compact(header, payload, ring[kid])


def _ld_sign(ring: Keyring, kid: str, doc: dict) -> dict:
    signature = ring.sign(kid, canonical_serialize(doc))
    return {
        **doc,
        "proof": {
            "type": "Ed25519Signature2020",
            "proofPurpose": "assertionMethod",
            "verificationMethod": kid,
            "proofValue": b64url_encode(signature),
        },
    }


def vc_ld(ring: Keyring, kid: str, iss: str, sub: str, claims: dict, status, iat: int, exp: int) -> dict:
    doc = {
        "@context": LD_CONTEXT,
        "type": ["VerifiableCredential", "EmploymentCredential"],
        "issuer": iss,
        "issuanceDate": iso(iat),
        "expirationDate": iso(exp),
        "credentialSubject": {"id": sub, **claims},
    }
    if status is not None:
        doc["credentialStatus"] = {
            "type": "StatusList2021Entry",
            "statusPurpose": "revocation",
            "statusListCredential": status[0],
            "statusListIndex": str(status[1]),
        }
    return _ld_sign(ring, kid, doc)


def grant_claims(jti, iss, sub, scope, kb, status=None, cst=None, nbf=None, exp=None) -> dict:
    claims = {
        "jti": jti,
        "iss": iss,
        "sub": sub,
        "scope": list(scope),
        "nbf": FIXTURE_EPOCH - 3600 if nbf is None else nbf,
        "exp": FIXTURE_EPOCH + 30 * DAY if exp is None else exp,
        "kb": kb,
        "cst": {"purpose": "assist"} if cst is None else cst,
    }
    if status is not None:
        claims["status"] = {"list": status[0], "idx": status[1]}
    return claims


def dg_sd_jwt(ring: Keyring, rng: random.Random, claims: dict, kid=None, disclose=("cst",)) -> str:
    """Issuer-signed SD-JWT with the named claims moved into disclosures."""
    kid = kid or key_id(claims["iss"])
    payload = {k: v for k, v in claims.items() if k not in disclose}
    disclosures = []
    for name in disclose:
        if name in claims:
            salt = b64url_encode(rng.randbytes(16))
            disclosures.append(make_disclosure(salt, name, claims[name]))
    if disclosures:
        payload["_sd"] = sorted(disclosure_digest(d) for d in disclosures)
        payload["_sd_alg"] = "sha-256"
    header = {"alg": "EdDSA", "kid": kid, "typ": "dg+sd-jwt"}
    token = sign_compact(header, payload, ring[kid])
    return "~".join([token, *disclosures]) + "~"


def dg_ld(ring: Keyring, claims: dict, kid=None) -> dict:
    kid = kid or key_id(claims["iss"])
    doc = {"@context": DG_CONTEXT, "type": ["DelegationGrant"], **claims}
    return _ld_sign(ring, kid, doc)


def holder_claims(holder: str) -> dict:
    return {"department": "research", "holder_kid": key_id(holder), "role": "employee"}


def request_body(request_id, presentation, chain=(), policy_id="permissive", presenter_key_id=None, presenter_signature=None):
    body = {
        "request_id": request_id,
        "presentation": presentation,
        "chain_tokens": list(chain),
        "policy_id": policy_id,
    }
    if presenter_key_id is not None:
        body["presenter_key_id"] = presenter_key_id
    if presenter_signature is not None:
        body["presenter_signature"] = presenter_signature
    return body


def envelope_of(body: dict) -> dict:
    env = {k: v for k, v in body.items() if k != "presentation"}
    env["vp_token"] = body["presentation"]
    env["presentation_submission"] = {"id": "submission-1", "definition_id": "employment"}
    return env


def presenter_signature(ring: Keyring, kid: str, request_id: str) -> str:
    return b64url_encode(ring.sign(kid, request_id.encode("utf-8")))


def _mutate_b64_json(segment: str, mutate) -> str:
    obj = json.loads(b64url_decode(segment))
    mutate(obj)
    return b64url_encode(json.dumps(obj, separators=(",", ":"), sort_keys=True).encode("utf-8"))


def flip_payload_byte(token: str) -> str:
    """Change one character of a claim value without re-signing."""
    head, body, sig = token.split(".")

    def mutate(payload):
        value = payload["vc"]["department"]
        payload["vc"]["department"] = value[:-1] + chr(ord(value[-1]) ^ 0x01)

    return ".".join([head, _mutate_b64_json(body, mutate), sig])


def flip_header_byte(token: str) -> str:
    head, body, sig = token.split(".")

    def mutate(header):
        header["typ"] = header["typ"][:-1] + chr(ord(header["typ"][-1]) ^ 0x01)

    return ".".join([_mutate_b64_json(head, mutate), body, sig])


def flip_signature_bit(token: str) -> str:
    jws, sep, rest = token.partition("~")
    head, body, sig = jws.split(".")
    raw = bytearray(b64url_decode(sig))
    raw[0] ^= 0x01
    return ".".join([head, body, b64url_encode(bytes(raw))]) + sep + rest


# -- corpus -----------------------------------------------------------------


@dataclass
class Case:
    name: str
    scenario: str
    expected: str
    body: dict
    endpoint: str = "/verify"
    pair: str = ""
    expected_detail: str = ""
    tags: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "scenario": self.scenario,
            "endpoint": self.endpoint,
            "expected": self.expected,
            "expected_detail": self.expected_detail,
            "pair": self.pair,
            "tags": self.tags,
            "body": self.body,
        }


class CorpusBuilder:
    def __init__(self, seed: int):
        self.seed = seed
        self.rng = random.Random(seed)
        self.ring = Keyring(self.rng)
        self.ledger = AnchorStore(None)
        self.credentials: dict = {}
        self.chains: dict = {}
        self.cases: list[Case] = []

    # registry and policies

    def registry(self) -> dict:
        revoked = {RETIRED_ISSUER_KEY}
        keys = []
        for kid in Keyring.ORDER:
            if kid == ROGUE_KEY:
                continue
            keys.append({
                "key_id": kid,
                "controller": controller_of(kid),
                "algorithm": ED25519,
                "public_key": b64url_encode(public_bytes(self.ring[kid])),
                "revoked": kid in revoked,
            })
        status_docs = [
            {"id": CRED_LIST, "purpose": "revocation", "encoded_list": encode_status_list([REVOKED_CRED_INDEX]), "issued_at": FIXTURE_EPOCH - 60},
            {"id": GRANT_LIST, "purpose": "revocation", "encoded_list": encode_status_list([REVOKED_GRANT_INDEX]), "issued_at": FIXTURE_EPOCH - 60},
            {"id": CRED_ARCHIVE, "purpose": "revocation", "encoded_list": encode_status_list([]), "issued_at": FIXTURE_EPOCH - 3600},
            {"id": GRANT_ARCHIVE, "purpose": "revocation", "encoded_list": encode_status_list([]), "issued_at": FIXTURE_EPOCH - 3600},
        ]
        return {"keys": keys, "status_docs": status_docs, "trust_roots": [ISSUER]}

    def policies(self) -> dict:
        out = {}
        for pid, fields in POLICIES.items():
            out[pid] = {
                "policy_id": pid,
                "max_status_age_seconds": STATUS_MAX_AGE,
                "require_anchor": False,
                **fields,
            }
        return out

    # positives

    def build_positive_material(self) -> None:
        iat, exp = FIXTURE_EPOCH - DAY, FIXTURE_EPOCH + 365 * DAY
        for i, holder in enumerate(HOLDERS):
            status = (CRED_LIST, i)
            claims = holder_claims(holder)
            self.credentials[short(holder)] = {
                "jwt": vc_jwt(self.ring, ISSUER_KEY, ISSUER, holder, claims, status, iat, exp),
                "ld": vc_ld(self.ring, ISSUER_KEY, ISSUER, holder, claims, status, iat, exp),
            }
            grants = []
            delegator = holder
            for depth, (agent, scope) in enumerate(zip(AGENTS, CHAIN_SCOPES), 1):
                grants.append(grant_claims(
                    f"dg-{short(holder)}-{depth}", delegator, agent, scope, key_id(agent),
                    status=(GRANT_LIST, 16 + 3 * i + depth),
                    cst={"max_depth_hint": str(4 - depth), "purpose": "assist"},
                ))
                delegator = agent
            self.chains[short(holder)] = {
                "claims": grants,
                "sd": [dg_sd_jwt(self.ring, self.rng, g) for g in grants],
                "ld": [dg_ld(self.ring, g) for g in grants],
            }

    def anchor_positive_chains(self) -> None:
        from ..adapters import parse_grant
        from ..model import chain_fingerprint

        clock = Clock(FIXTURE_EPOCH - 1000)
        for holder in HOLDERS:
            for enc in ("sd", "ld"):
                tokens = self.chains[short(holder)][enc]
                for depth in (1, 2, 3):
                    fp = chain_fingerprint([parse_grant(t) for t in tokens[:depth]])
                    self.ledger.anchor(fp, clock)

    def fingerprint(self, tokens) -> str:
        from ..adapters import parse_grant
        from ..model import chain_fingerprint

        return chain_fingerprint([parse_grant(t) for t in tokens])

    # scenario cases

    def add(self, *args, **kwargs) -> Case:
        case = Case(*args, **kwargs)
        self.cases.append(case)
        return case

    def build_cases(self) -> None:
        ring, rng = self.ring, self.rng
        alice = HOLDERS[0]
        cred = self.credentials["alice"]
        sd, ld = self.chains["alice"]["sd"], self.chains["alice"]["ld"]
        claims = self.chains["alice"]["claims"]
        iat, exp = FIXTURE_EPOCH - DAY, FIXTURE_EPOCH + 365 * DAY
        a_claims = holder_claims(alice)

        # S1: federated web flow
        self.add("s1-vcjwt-ok", "S1", "OK", request_body("s1-vcjwt-ok", cred["jwt"]))
        body = request_body("s1-vcjwt-chain-ok", cred["jwt"], sd[:1])
        self.add("s1-vcjwt-chain-ok", "S1", "OK", body)
        self.add("s1-envelope-ok", "S1", "OK", envelope_of(request_body("s1-vcjwt-ok", cred["jwt"])),
                 endpoint="/verify/oidc4vp", pair="s1-vcjwt-ok")
        self.add("s1-envelope-chain-ok", "S1", "OK", envelope_of(body),
                 endpoint="/verify/oidc4vp", pair="s1-vcjwt-chain-ok")
        self.add("s1-payload-tampered", "S1", "E200",
                 request_body("s1-payload-tampered", flip_payload_byte(cred["jwt"])),
                 expected_detail="credential_signature")
        self.add("s1-header-tampered", "S1", "E200",
                 request_body("s1-header-tampered", flip_header_byte(cred["jwt"])),
                 expected_detail="credential_signature")
        self.add("s1-envelope-missing-vp-token", "S1", "E100",
                 {"request_id": "s1-envelope-missing-vp-token", "policy_id": "permissive"},
                 endpoint="/verify/oidc4vp", expected_detail="vp_token")

        # S2: SSI native flow
        self.add("s2-vcld-ok", "S2", "OK", request_body("s2-vcld-ok", cred["ld"]), tags=["SSI"])
        self.add("s2-vcld-ld-chain-ok", "S2", "OK", request_body("s2-vcld-ld-chain-ok", cred["ld"], ld[:2]), tags=["SSI"])
        self.add("s2-vcld-sd-chain-ok", "S2", "OK", request_body("s2-vcld-sd-chain-ok", cred["ld"], sd[:1]), tags=["HYBRID"])
        revoked_ld = vc_ld(ring, ISSUER_KEY, ISSUER, alice, a_claims, (CRED_LIST, REVOKED_CRED_INDEX), iat, exp)
        self.add("s2-vcld-revoked", "S2", "E200", request_body("s2-vcld-revoked", revoked_ld),
                 expected_detail="credential_revoked")
        revoked_jwt = vc_jwt(ring, ISSUER_KEY, ISSUER, alice, a_claims, (CRED_LIST, REVOKED_CRED_INDEX), iat, exp)
        self.add("s2-vcjwt-revoked", "S2", "E200", request_body("s2-vcjwt-revoked", revoked_jwt),
                 expected_detail="credential_revoked")

        # S3: human to agent delegation
        for depth in (1, 2, 3):
            agent_kid = key_id(AGENTS[depth - 1])
            rid = f"s3-sd-depth{depth}-ok"
            self.add(rid, "S3", "OK", request_body(rid, cred["jwt"], sd[:depth], presenter_key_id=agent_kid,
                     presenter_signature=presenter_signature(ring, agent_kid, rid)))
            rid = f"s3-ld-depth{depth}-ok"
            self.add(rid, "S3", "OK", request_body(rid, cred["jwt"], ld[:depth]), tags=["HYBRID"])
        escalated = grant_claims("dg-alice-2-escalated", AGENTS[0], AGENTS[1], ["doc:delete", "doc:read"], key_id(AGENTS[1]))
        self.add("s3-scope-escalation", "S3", "E400",
                 request_body("s3-scope-escalation", cred["jwt"], [sd[0], dg_sd_jwt(ring, rng, escalated)]),
                 expected_detail="scope_escalation")
        back = grant_claims("dg-alice-cycle-back", AGENTS[0], alice, ["doc:read"], key_id(alice))
        again = grant_claims("dg-alice-cycle-again", alice, AGENTS[0], ["doc:read"], key_id(AGENTS[0]))
        self.add("s3-cycle", "S3", "E300",
                 request_body("s3-cycle", cred["jwt"], [sd[0], dg_sd_jwt(ring, rng, back), dg_sd_jwt(ring, rng, again)]),
                 expected_detail="chain_cycle")

        # S4: negative corpus, minimal mutations of valid bases
        neg = []
        no_sub = vc_jwt(ring, ISSUER_KEY, ISSUER, alice, a_claims, (CRED_LIST, 0), iat, exp)
        head, payload, _ = no_sub.split(".")
        stripped = json.loads(b64url_decode(payload))
        del stripped["sub"]
        no_sub = sign_compact(json.loads(b64url_decode(head)), stripped, ring[ISSUER_KEY])
        neg.append(("s4-missing-subject", "E100", request_body("s4-missing-subject", no_sub), "sub"))
        two_segments = ".".join(cred["jwt"].split(".")[:2])
        neg.append(("s4-two-segment-token", "E100", request_body("s4-two-segment-token", two_segments), "presentation_shape"))
        hs_header = {"alg": "HS256", "kid": ISSUER_KEY, "typ": "vc+jwt"}
        hs_token = ".".join([
            b64url_encode(json.dumps(hs_header, separators=(",", ":")).encode()),
            cred["jwt"].split(".")[1],
            cred["jwt"].split(".")[2],
        ])
        neg.append(("s4-unsupported-alg", "E100", request_body("s4-unsupported-alg", hs_token), "unsupported_alg"))
        no_kb = {k: v for k, v in claims[0].items() if k != "kb"}
        neg.append(("s4-grant-missing-key-binding", "E100",
                    request_body("s4-grant-missing-key-binding", cred["jwt"], [dg_sd_jwt(ring, rng, no_kb)]), "kb"))
        inverted = dict(claims[0], jti="dg-alice-1-inverted", nbf=FIXTURE_EPOCH + DAY, exp=FIXTURE_EPOCH)
        neg.append(("s4-grant-inverted-window", "E100",
                    request_body("s4-grant-inverted-window", cred["jwt"], [dg_sd_jwt(ring, rng, inverted)]), "grant.validity"))
        ld_no_proof = {k: v for k, v in cred["ld"].items() if k != "proof"}
        neg.append(("s4-vcld-missing-proof", "E100", request_body("s4-vcld-missing-proof", ld_no_proof), "proof"))

        neg.append(("s4-signature-bitflip", "E200",
                    request_body("s4-signature-bitflip", flip_signature_bit(cred["jwt"])), "credential_signature"))
        neg.append(("s4-payload-tampered", "E200",
                    request_body("s4-payload-tampered", flip_payload_byte(cred["jwt"])), "credential_signature"))
        rogue = vc_jwt(ring, ROGUE_KEY, ISSUER, alice, a_claims, (CRED_LIST, 0), iat, exp)
        neg.append(("s4-unknown-issuer-key", "E200", request_body("s4-unknown-issuer-key", rogue), "credential_key_unresolvable"))
        retired = vc_jwt(ring, RETIRED_ISSUER_KEY, ISSUER, alice, a_claims, (CRED_LIST, 0), iat, exp)
        neg.append(("s4-revoked-issuer-key", "E200", request_body("s4-revoked-issuer-key", retired), "credential_key_unresolvable"))
        expired = vc_jwt(ring, ISSUER_KEY, ISSUER, alice, a_claims, (CRED_LIST, 0), iat - 30 * DAY, FIXTURE_EPOCH - 100)
        neg.append(("s4-credential-expired", "E200", request_body("s4-credential-expired", expired), "credential_expired"))
        neg.append(("s4-credential-revoked", "E200", request_body("s4-credential-revoked", revoked_jwt), "credential_revoked"))
        stale = vc_jwt(ring, ISSUER_KEY, ISSUER, alice, a_claims, (CRED_ARCHIVE, 0), iat, exp)
        neg.append(("s4-credential-status-stale", "E200", request_body("s4-credential-status-stale", stale), "credential_status_stale"))

        neg.append(("s4-chain-order-swapped", "E300",
                    request_body("s4-chain-order-swapped", cred["jwt"], [sd[1], sd[0]]), "chain_discontinuity"))
        neg.append(("s4-grant-signature-bitflip", "E300",
                    request_body("s4-grant-signature-bitflip", cred["jwt"], [flip_signature_bit(sd[0])]), "grant_signature"))
        neg.append(("s4-grant-wrong-signer", "E300",
                    request_body("s4-grant-wrong-signer", cred["jwt"],
                                 [dg_sd_jwt(ring, rng, dict(claims[0], jti="dg-alice-1-forged"), kid=key_id(AGENTS[1]))]),
                    "grant_issuer_key_mismatch"))
        neg.append(("s4-chain-too-deep", "E300",
                    request_body("s4-chain-too-deep", cred["jwt"], sd[:2], policy_id="shallow-depth"), "chain_too_deep"))
        neg.append(("s4-untrusted-root", "E300",
                    request_body("s4-untrusted-root", cred["jwt"], [sd[2]]), "chain_untrusted_root"))
        neg.append(("s4-cycle", "E300",
                    request_body("s4-cycle", cred["jwt"], [sd[0], dg_sd_jwt(ring, rng, back), dg_sd_jwt(ring, rng, again)]), "chain_cycle"))
        neg.append(("s4-unanchored-required", "E300",
                    request_body("s4-unanchored-required", cred["jwt"],
                                 [dg_sd_jwt(ring, rng, dict(claims[0], jti="dg-alice-1-never-anchored"))],
                                 policy_id="anchor-required"), "anchor_absent"))

        neg.append(("s4-scope-escalation", "E400",
                    request_body("s4-scope-escalation", cred["jwt"], [sd[0], dg_sd_jwt(ring, rng, escalated)]), "scope_escalation"))
        dg_expired = dict(claims[0], jti="dg-alice-1-expired", nbf=FIXTURE_EPOCH - 2 * DAY, exp=FIXTURE_EPOCH - 60)
        neg.append(("s4-grant-expired", "E400",
                    request_body("s4-grant-expired", cred["jwt"], [dg_sd_jwt(ring, rng, dg_expired)]), "grant_expired"))
        dg_revoked = dict(claims[0], jti="dg-alice-1-revoked", status={"list": GRANT_LIST, "idx": REVOKED_GRANT_INDEX})
        neg.append(("s4-grant-revoked", "E400",
                    request_body("s4-grant-revoked", cred["jwt"], [dg_sd_jwt(ring, rng, dg_revoked)]), "grant_revoked"))
        dg_stale = dict(claims[0], jti="dg-alice-1-stale", status={"list": GRANT_ARCHIVE, "idx": 0})
        neg.append(("s4-grant-status-stale", "E400",
                    request_body("s4-grant-status-stale", cred["jwt"], [dg_sd_jwt(ring, rng, dg_stale)]), "grant_status_stale"))
        neg.append(("s4-key-binding-mismatch", "E400",
                    request_body("s4-key-binding-mismatch", cred["jwt"], sd[:2], presenter_key_id=key_id(AGENTS[0])),
                    "presenter_key_mismatch"))
        rid = "s4-presenter-signature-wrong-key"
        neg.append((rid, "E400",
                    request_body(rid, cred["jwt"], sd[:2], presenter_key_id=key_id(AGENTS[1]),
                                 presenter_signature=presenter_signature(ring, key_id(AGENTS[0]), rid)),
                    "presenter_signature"))

        untrusted = vc_jwt(ring, UNTRUSTED_KEY, UNTRUSTED_ISSUER, alice, a_claims, (CRED_LIST, 0), iat, exp)
        neg.append(("s4-untrusted-issuer", "E500", request_body("s4-untrusted-issuer", untrusted), "untrusted_issuer"))
        neg.append(("s4-disallowed-type", "E500",
                    request_body("s4-disallowed-type", cred["ld"], policy_id="strict-issuer"), "credential_type_not_allowed"))
        neg.append(("s4-required-scope-missing", "E500",
                    request_body("s4-required-scope-missing", cred["jwt"], sd[:3], policy_id="requires-doc-write"),
                    "required_scope_not_granted"))
        for name, code, body, detail in neg:
            self.add(name, "S4", code, body, expected_detail=detail)

        # S5: anchored delegation
        unanchored = [dg_sd_jwt(ring, rng, dict(claims[0], jti="dg-alice-1-unanchored"))]
        self.add("s5-unanchored-not-required", "S5", "OK", request_body("s5-unanchored-not-required", cred["jwt"], unanchored))
        self.add("s5-anchored-not-required", "S5", "OK", request_body("s5-anchored-not-required", cred["jwt"], sd[:2]))
        for depth in (1, 2, 3):
            rid = f"s5-anchored-depth{depth}-required"
            self.add(rid, "S5", "OK", request_body(rid, cred["jwt"], sd[:depth], policy_id="anchor-required"))
        self.add("s5-anchored-ld-required", "S5", "OK",
                 request_body("s5-anchored-ld-required", cred["ld"], ld[:2], policy_id="anchor-required"))
        self.add("s5-unanchored-required", "S5", "E300",
                 request_body("s5-unanchored-required", cred["jwt"], unanchored, policy_id="anchor-required"),
                 expected_detail="anchor_absent")
        clock = Clock(FIXTURE_EPOCH - 900)
        revoked_chain = [dg_sd_jwt(ring, rng, dict(claims[0], jti="dg-alice-1-anchor-revoked"))]
        fp = self.fingerprint(revoked_chain)
        self.ledger.anchor(fp, clock)
        self.ledger.revoke(fp, Clock(FIXTURE_EPOCH - 800))
        self.add("s5-anchor-revoked", "S5", "E300",
                 request_body("s5-anchor-revoked", cred["jwt"], revoked_chain, policy_id="anchor-required"),
                 expected_detail="anchor_revoked")
        self.add("s5-anchor-revoked-not-required", "S5", "OK",
                 request_body("s5-anchor-revoked-not-required", cred["jwt"], revoked_chain))
        expired_chain = [dg_sd_jwt(ring, rng, dict(claims[0], jti="dg-alice-1-anchor-expired"))]
        self.ledger.anchor(self.fingerprint(expired_chain), clock, expires_at=FIXTURE_EPOCH - 10)
        self.add("s5-anchor-expired", "S5", "E300",
                 request_body("s5-anchor-expired", cred["jwt"], expired_chain, policy_id="anchor-required"),
                 expected_detail="anchor_expired")
        substituted = dict(claims[1], jti="dg-alice-2-substituted", scope=["calendar:read"])
        self.add("s5-anchor-mismatch", "S5", "E300",
                 request_body("s5-anchor-mismatch", cred["jwt"], [sd[0], dg_sd_jwt(ring, rng, substituted)],
                              policy_id="anchor-required"),
                 expected_detail="anchor_absent")

    def build(self) -> "CorpusBuilder":
        self.build_positive_material()
        self.anchor_positive_chains()
        self.build_cases()
        return self


def _write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def generate_fixtures(seed: int, out_dir, precheck: bool = True) -> Path:
    """Write the whole seeded corpus under ``out_dir`` and return it.

    With ``precheck`` every case is replayed through an in-process gateway and
    generation fails if any case does not produce its expected code.
    """
    out = Path(out_dir)
    builder = CorpusBuilder(seed).build()
    ring = builder.ring
    _write_json(out / "keys" / "registry.json", builder.registry())
    _write_json(out / "keys" / "verifier.json", {"key_id": VERIFIER_KEY, "seed": b64url_encode(ring.seeds[VERIFIER_KEY])})
    _write_json(out / "keys" / "keyring.json", ring.to_json())
    for pid, policy in builder.policies().items():
        _write_json(out / "policies" / f"{pid}.json", policy)
    ledger_path = out / "anchors" / "ledger.jsonl"
    ledger_path.parent.mkdir(parents=True, exist_ok=True)
    ledger_path.write_bytes(b"".join(canonical_serialize(r) + b"\n" for r in builder.ledger.records))
    for holder, creds in builder.credentials.items():
        (out / "credentials").mkdir(parents=True, exist_ok=True)
        (out / "credentials" / f"{holder}.jwt").write_text(creds["jwt"] + "\n", encoding="ascii")
        _write_json(out / "credentials" / f"{holder}.jsonld", creds["ld"])
    for holder, chain in builder.chains.items():
        for depth, (tok, doc) in enumerate(zip(chain["sd"], chain["ld"]), 1):
            (out / "grants" / holder).mkdir(parents=True, exist_ok=True)
            (out / "grants" / holder / f"dg-{depth}.sd-jwt").write_text(tok + "\n", encoding="ascii")
            _write_json(out / "grants" / holder / f"dg-{depth}.jsonld", doc)
    _write_json(out / "corpus.json", {
        "seed": seed,
        "clock": FIXTURE_EPOCH,
        "credentials": builder.credentials,
        "chains": {h: {"sd": c["sd"], "ld": c["ld"]} for h, c in builder.chains.items()},
        "holders": [short(h) for h in HOLDERS],
        "agents": [key_id(a) for a in AGENTS],
        "holder_keys": {short(h): key_id(h) for h in HOLDERS},
    })
    for case in builder.cases:
        _write_json(out / "requests" / case.scenario / f"{case.name}.json", case.to_json())
    if precheck:
        _precheck(out)
    return out


def load_cases(corpus_dir, scenario: str) -> list[dict]:
    paths = sorted((Path(corpus_dir) / "requests" / scenario).glob("*.json"))
    return [json.loads(p.read_text(encoding="utf-8")) for p in paths]


class PrecheckError(AssertionError):
    pass


def _precheck(out: Path) -> None:
    from .runtime import in_process_gateway

    gateway = in_process_gateway(out)
    clock = Clock(FIXTURE_EPOCH)
    for scenario in ("S1", "S2", "S3", "S4", "S5"):
        for case in load_cases(out, scenario):
            handler = gateway.handle_verify_oidc4vp if case["endpoint"] == "/verify/oidc4vp" else gateway.handle_verify
            result = handler(case["body"], clock)
            got = result.body.get("payload", {}).get("result")
            if got != case["expected"]:
                raise PrecheckError(f"{case['name']}: expected {case['expected']}, got {got} ({result.body})")
