from __future__ import annotations

import collections
import dataclasses
import json
import random

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from dgverify import engine
from dgverify.adapters import VerificationRequest, detect_profile
from dgverify.harness.fixtures import AGENTS, Keyring, dg_sd_jwt, grant_claims, key_id, load_cases, request_body
from dgverify.jose import decode_compact, ed25519_verify
from dgverify.model import Clock, FLAG_NAMES, StatusContext, canonical_serialize, to_canonical

from .strategies import ATOM


def _cvc(gateway, clock, body):
    req = VerificationRequest.from_json(body)
    return gateway.build_cvc(req, detect_profile(req), clock)


def _run(gateway, cvc, clock, ledger="default"):
    cfg = gateway.config
    counters = collections.Counter()
    signed = engine.verify(cvc, cfg.registry, cfg.ledger if ledger == "default" else ledger, clock, cfg.signer, counters)
    return signed, counters


@pytest.fixture(scope="module")
def alice(corpus_index):
    return corpus_index["credentials"]["alice"], corpus_index["chains"]["alice"]


def test_ok_sets_every_flag_and_scope(gateway, clock, alice):
    creds, chains = alice
    signed, counters = _run(gateway, _cvc(gateway, clock, request_body("r1", creds["jwt"], chains["sd"])), clock)
    assert signed.vro.result == "OK" and signed.vro.detail == "ok"
    assert all(signed.vro.invariant_flags[f] for f in FLAG_NAMES)
    assert to_canonical(signed.vro.effective_scope) == ["doc:read"]
    assert counters["signature_checks"] == 4 and counters["ledger_lookups"] == 0
    assert signed.vro.chain_fingerprint is None


def test_vro_is_signed_over_canonical_payload(gateway, clock, alice):
    signed, _ = _run(gateway, _cvc(gateway, clock, request_body("r2", alice[0]["jwt"])), clock)
    jws = decode_compact(signed.jws)
    assert jws.header == {"alg": "EdDSA", "kid": gateway.config.signer.key_id, "typ": "vro+jwt"}
    assert ed25519_verify(gateway.config.signer.public_key, jws.signature, jws.signing_input)
    assert canonical_serialize(signed.vro) == signed.payload


def test_verification_is_pure(gateway, clock, alice):
    cvc = _cvc(gateway, clock, request_body("r3", alice[0]["ld"], alice[1]["ld"]))
    a, _ = _run(gateway, cvc, clock)
    b, _ = _run(gateway, cvc, clock)
    assert a.jws == b.jws


def test_first_failure_wins(gateway, clock, alice):
    creds, chains = alice
    cvc = _cvc(gateway, clock, request_body("r4", creds["jwt"], chains["sd"][:1]))
    cred = cvc.credentials[0]
    bad_sig = bytes([cred.proof.signature[0] ^ 1]) + cred.proof.signature[1:]
    broken_cred = dataclasses.replace(cred, proof=dataclasses.replace(cred.proof, signature=bad_sig))
    expired_grant = dataclasses.replace(cvc.chain[0], not_after=clock.now - 1, not_before=clock.now - 10)
    both = dataclasses.replace(cvc, credentials=(broken_cred,), chain=(expired_grant,))
    signed, _ = _run(gateway, both, clock)
    assert (signed.vro.result, signed.vro.detail) == ("E200", "credential_signature")
    only_grant = dataclasses.replace(cvc, chain=(expired_grant,))
    signed, _ = _run(gateway, only_grant, clock)
    assert (signed.vro.result, signed.vro.detail) == ("E400", "grant_expired")


@pytest.mark.parametrize(
    "case,true_flags",
    [
        ("s4-signature-bitflip", {"structural_validity"}),
        ("s4-grant-signature-bitflip", {"structural_validity"}),
        ("s4-grant-expired", {"structural_validity", "signature_verification"}),
        ("s4-scope-escalation", {"structural_validity", "signature_verification", "temporal_validity"}),
        ("s4-untrusted-issuer", {"structural_validity", "signature_verification", "temporal_validity", "chain_integrity"}),
    ],
)
def test_flags_reflect_the_stage_reached(gateway, clock, corpus, case, true_flags):
    body = next(c["body"] for c in load_cases(corpus, "S4") if c["name"] == case)
    signed, _ = _run(gateway, _cvc(gateway, clock, body), clock)
    assert {f for f, v in signed.vro.invariant_flags.items() if v} == true_flags


def test_missing_status_resolution_fails_closed(gateway, clock, alice):
    cvc = _cvc(gateway, clock, request_body("r5", alice[0]["jwt"]))
    empty = dataclasses.replace(cvc, status=StatusContext(clock.now, ()))
    signed, _ = _run(gateway, empty, clock)
    assert (signed.vro.result, signed.vro.detail) == ("E200", "credential_status_unresolved")


def test_unbound_holder_key_fails_closed(gateway, clock, alice):
    cvc = _cvc(gateway, clock, request_body("r6", alice[0]["jwt"]))
    cred = cvc.credentials[0]
    claims = {k: v for k, v in cred.claims.items() if k != engine.HOLDER_KEY_CLAIM}
    unbound = dataclasses.replace(cvc, credentials=(dataclasses.replace(cred, claims=claims),))
    signed, _ = _run(gateway, unbound, clock)
    assert (signed.vro.result, signed.vro.detail) == ("E400", "presenter_key_unbound")


def test_presenter_controller_mismatch(gateway, clock, alice):
    creds, chains = alice
    cvc = _cvc(gateway, clock, request_body("r7", creds["jwt"], chains["sd"][:1]))
    wrong = dataclasses.replace(cvc.chain[0], key_binding="did:example:agent-2#key-1")
    with pytest.raises(engine.VerificationFailure, match="presenter_controller_mismatch"):
        engine.verify_presenter_binding(dataclasses.replace(cvc, chain=(wrong,)), gateway.config.registry)


def test_required_anchor_without_store(gateway, clock, alice):
    creds, chains = alice
    cvc = _cvc(gateway, clock, request_body("r8", creds["jwt"], chains["sd"][:1], policy_id="anchor-required"))
    signed, counters = _run(gateway, cvc, clock, ledger=None)
    assert (signed.vro.result, signed.vro.detail) == ("E300", "anchor_store_unavailable")
    signed, counters = _run(gateway, cvc, clock)
    assert signed.vro.result == "OK" and counters["ledger_lookups"] == 1
    assert signed.vro.chain_fingerprint and len(signed.vro.chain_fingerprint) == 64


def test_non_context_input_is_structural_error(gateway, clock):
    signed = engine.verify(object(), gateway.config.registry, None, clock, gateway.config.signer)
    assert (signed.vro.result, signed.vro.detail) == ("E100", "cvc")
    assert not any(signed.vro.invariant_flags.values())


def test_missing_signer_is_refused(gateway, clock, alice):
    cvc = _cvc(gateway, clock, request_body("r9", alice[0]["jwt"]))
    with pytest.raises(engine.SignerError):
        engine.verify(cvc, gateway.config.registry, None, clock, None)


def test_clock_drives_expiry(gateway, alice):
    creds, chains = alice
    late = Clock(10**10)
    cvc = _cvc(gateway, late, request_body("r10", creds["jwt"]))
    signed, _ = _run(gateway, cvc, late)
    assert (signed.vro.result, signed.vro.detail) == ("E200", "credential_expired")


# -- scope monotonicity over random, properly signed chains --------------------


@st.composite
def narrowing_scopes(draw):
    root = draw(st.sets(ATOM, min_size=1, max_size=5))
    scopes = [sorted(root)]
    for _ in range(draw(st.integers(0, 2))):
        scopes.append(sorted(draw(st.sets(st.sampled_from(scopes[-1]), min_size=1, max_size=len(scopes[-1])))))
    return scopes


def _signed_chain(ring, scopes, tag):
    rng = random.Random(0)
    tokens, delegator = [], "did:example:alice"
    for depth, (agent, scope) in enumerate(zip(AGENTS, scopes), 1):
        claims = grant_claims(f"prop-{tag}-{depth}", delegator, agent, scope, key_id(agent))
        tokens.append(dg_sd_jwt(ring, rng, claims))
        delegator = agent
    return tokens


@pytest.fixture(scope="module")
def ring(corpus):
    return Keyring.from_json(json.loads((corpus / "keys" / "keyring.json").read_text()))


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(narrowing_scopes())
def test_effective_scope_never_exceeds_root(gateway, clock, alice, ring, scopes):
    tokens = _signed_chain(ring, scopes, "ok")
    signed, _ = _run(gateway, _cvc(gateway, clock, request_body("prop", alice[0]["jwt"], tokens)), clock)
    assert signed.vro.result == "OK"
    assert set(to_canonical(signed.vro.effective_scope)) <= set(scopes[0])
    assert to_canonical(signed.vro.effective_scope) == scopes[-1]


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(narrowing_scopes().filter(lambda s: len(s) > 1), st.data())
def test_any_escalation_is_rejected(gateway, clock, alice, ring, scopes, data):
    at = data.draw(st.integers(1, len(scopes) - 1))
    extra = data.draw(ATOM.filter(lambda a: a not in scopes[at - 1]))
    escalated = scopes[:at] + [sorted(set(scopes[at]) | {extra})] + scopes[at + 1:]
    tokens = _signed_chain(ring, escalated, "esc")
    signed, _ = _run(gateway, _cvc(gateway, clock, request_body("prop", alice[0]["jwt"], tokens)), clock)
    assert (signed.vro.result, signed.vro.detail) == ("E400", "scope_escalation")
