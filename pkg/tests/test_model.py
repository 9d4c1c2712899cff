from __future__ import annotations

import dataclasses
import hashlib

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgverify.codes import ErrorCode, FormatError
from dgverify.model import (
    DelegationGrant,
    EmptyChainError,
    ProofKind,
    ProofObject,
    Scope,
    StatusRef,
    VerificationPolicy,
    b64url_decode,
    b64url_encode,
    canonical_serialize,
    chain_fingerprint,
    scope_contains,
    validate_grant,
    validate_policy,
    validate_proof,
)

from .strategies import canonical_values, grants, scopes, strictly_equal


def _grant(**changes):
    base = DelegationGrant(
        "dg-1", "did:example:a", "did:example:b", Scope.of("doc:read"), 0, 10, "did:example:b#key-1",
        StatusRef("https://status.example/l", 1), ProofObject(ProofKind.SD_JWT, "did:example:a#key-1", bytes(64), b"x.y"),
    )
    return dataclasses.replace(base, **changes)


class TestScope:
    @given(scopes(), scopes(), scopes())
    def test_partial_order(self, a, b, c):
        assert scope_contains(a, a)
        if scope_contains(a, b) and scope_contains(b, a):
            assert a == b
        if scope_contains(a, b) and scope_contains(b, c):
            assert scope_contains(a, c)

    @given(scopes())
    def test_empty_scope_is_bottom(self, a):
        assert scope_contains(a, Scope.of())

    def test_escalation_is_not_contained(self):
        assert not scope_contains(Scope.of("doc:read"), Scope.of("doc:read", "doc:write"))

    @pytest.mark.parametrize("atom", ["doc", "Doc:read", "doc:", ":read", "doc read:x", "doc:read:x"])
    def test_malformed_atoms_are_rejected(self, atom):
        with pytest.raises(FormatError):
            validate_grant(_grant(scope=Scope.of(atom)))


class TestCanonical:
    @settings(max_examples=300)
    @given(canonical_values(), canonical_values())
    def test_equal_bytes_iff_equal_values(self, x, y):
        assert (canonical_serialize(x) == canonical_serialize(y)) == strictly_equal(x, y)

    @given(st.dictionaries(st.text(max_size=5), st.integers(), max_size=6), st.randoms())
    def test_key_order_does_not_matter(self, mapping, rnd):
        items = list(mapping.items())
        rnd.shuffle(items)
        assert canonical_serialize(dict(items)) == canonical_serialize(mapping)

    def test_exact_encoding(self):
        value = {"b": [1, True, None], "a": "é", "c": b"\xff\x00"}
        assert canonical_serialize(value) == '{"a":"é","b":[1,true,null],"c":"_wA"}'.encode("utf-8")

    def test_floats_are_refused(self):
        with pytest.raises(TypeError):
            canonical_serialize({"x": 1.5})

    def test_scope_serializes_as_sorted_list(self):
        assert canonical_serialize(Scope.of("b:x", "a:y")) == b'["a:y","b:x"]'

    @given(st.binary())
    def test_b64url_roundtrip_without_padding(self, raw):
        text = b64url_encode(raw)
        assert "=" not in text and "+" not in text and "/" not in text
        assert b64url_decode(text) == raw

    @pytest.mark.parametrize("text", ["a", "ab=", "a+b/", "a b"])
    def test_b64url_rejects_non_canonical_text(self, text):
        with pytest.raises(ValueError):
            b64url_decode(text)


class TestFingerprint:
    def test_matches_hashlib_over_canonical_bytes(self):
        chain = [_grant()]
        assert chain_fingerprint(chain) == hashlib.sha256(canonical_serialize(chain)).hexdigest()

    def test_empty_chain_has_no_fingerprint(self):
        with pytest.raises(EmptyChainError):
            chain_fingerprint([])

    @settings(max_examples=100)
    @given(grants(), st.sampled_from(["grant_id", "issuer", "subject", "key_binding"]))
    def test_any_field_change_changes_fingerprint(self, grant, field):
        mutated = dataclasses.replace(grant, **{field: getattr(grant, field) + "x"})
        assert chain_fingerprint([grant]) != chain_fingerprint([mutated])

    @given(st.lists(grants(), min_size=2, max_size=4, unique_by=lambda g: g.grant_id))
    def test_order_matters(self, chain):
        assert chain_fingerprint(chain) != chain_fingerprint(chain[::-1])


class TestValidators:
    def test_self_delegation_is_structural_error(self):
        with pytest.raises(FormatError) as err:
            validate_grant(_grant(subject="did:example:a"))
        assert err.value.code is ErrorCode.E100

    def test_inverted_window(self):
        with pytest.raises(FormatError, match="validity"):
            validate_grant(_grant(not_before=11))

    def test_jws_grant_proof_kind_is_refused(self):
        proof = ProofObject(ProofKind.JWS_ED25519, "did:example:a#key-1", bytes(64), b"x")
        with pytest.raises(FormatError, match="proof.kind"):
            validate_grant(_grant(proof=proof))

    @pytest.mark.parametrize(
        "proof",
        [
            ProofObject(ProofKind.SD_JWT, "k", bytes(63), b"x"),
            ProofObject(ProofKind.SD_JWT, "k", bytes(64), b""),
            ProofObject(ProofKind.LD_STUB, "k", b"sig", b"payload"),
            ProofObject(ProofKind.JWS_ED25519, "", bytes(64), b"x"),
        ],
    )
    def test_bad_proofs(self, proof):
        with pytest.raises(FormatError):
            validate_proof(proof, "p")

    def test_policy_depth_bounds(self):
        policy = VerificationPolicy.from_dict({
            "policy_id": "p", "trusted_issuers": [], "allowed_credential_types": ["VC_JWT"],
            "max_chain_depth": 17, "max_status_age_seconds": 60,
        })
        with pytest.raises(FormatError, match="max_chain_depth"):
            validate_policy(policy)

    def test_policy_roundtrip(self):
        data = {
            "policy_id": "p", "trusted_issuers": ["did:example:i"], "allowed_credential_types": ["VC_LD", "VC_JWT"],
            "max_chain_depth": 2, "max_status_age_seconds": 60, "require_anchor": True, "required_scope": ["doc:read"],
        }
        policy = VerificationPolicy.from_dict(data)
        validate_policy(policy)
        assert VerificationPolicy.from_dict(policy.to_dict()) == policy
