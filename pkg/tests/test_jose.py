"""Token handling checked against independent implementations (PyJWT, PyNaCl)."""

from __future__ import annotations

import base64
import hashlib
import json

import jwt
import nacl.exceptions
import nacl.signing
import pytest
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from dgverify.adapters import parse_dg_sd_jwt, parse_vc_jwt
from dgverify.codes import FormatError
from dgverify.jose import (
    JoseError,
    decode_compact,
    disclosure_digest,
    ed25519_verify,
    make_disclosure,
    private_key_from_seed,
    public_bytes,
    sign_compact,
)

SEED = bytes(range(32))


def test_signature_verifies_with_pynacl():
    key = private_key_from_seed(SEED)
    token = sign_compact({"alg": "EdDSA", "kid": "k"}, {"sub": "x"}, key)
    head, body, sig = token.split(".")
    verify_key = nacl.signing.SigningKey(SEED).verify_key
    assert bytes(verify_key) == public_bytes(key)
    verify_key.verify(f"{head}.{body}".encode(), base64.urlsafe_b64decode(sig + "=="))


def test_pyjwt_reads_our_tokens():
    key = private_key_from_seed(SEED)
    token = sign_compact({"alg": "EdDSA", "kid": "k", "typ": "vc+jwt"}, {"sub": "x", "n": 3}, key)
    claims = jwt.decode(token, key.public_key(), algorithms=["EdDSA"])
    assert claims == {"sub": "x", "n": 3}


def test_pyjwt_eddsa_token_decodes_and_verifies():
    key = Ed25519PrivateKey.from_private_bytes(SEED)
    token = jwt.encode({"sub": "y"}, key, algorithm="EdDSA", headers={"kid": "k"})
    jws = decode_compact(token)
    assert jws.payload == {"sub": "y"}
    assert ed25519_verify(public_bytes(key), jws.signature, jws.signing_input)


def test_hs256_token_is_unsupported():
    token = jwt.encode({"iss": "a", "sub": "b"}, "secret-secret-secret-secret-32b!", algorithm="HS256", headers={"kid": "k"})
    with pytest.raises(JoseError, match="unsupported_alg"):
        decode_compact(token)
    with pytest.raises(FormatError, match="unsupported_alg"):
        parse_vc_jwt(token)


def test_missing_kid_is_refused():
    token = sign_compact({"alg": "EdDSA"}, {"sub": "x"}, private_key_from_seed(SEED))
    with pytest.raises(JoseError, match="missing_kid"):
        decode_compact(token)


def test_wrong_key_signature_fails():
    other = nacl.signing.SigningKey(bytes(32))
    signed = other.sign(b"message")
    assert not ed25519_verify(public_bytes(private_key_from_seed(SEED)), signed.signature, b"message")
    with pytest.raises(nacl.exceptions.BadSignatureError):
        nacl.signing.SigningKey(SEED).verify_key.verify(b"message", signed.signature)


def test_disclosure_digest_by_hand():
    disclosure = make_disclosure("c2FsdA", "cst", {"purpose": "assist"})
    decoded = json.loads(base64.urlsafe_b64decode(disclosure + "=" * (-len(disclosure) % 4)))
    assert decoded == ["c2FsdA", "cst", {"purpose": "assist"}]
    expected = base64.urlsafe_b64encode(hashlib.sha256(disclosure.encode()).digest()).rstrip(b"=").decode()
    assert disclosure_digest(disclosure) == expected


def _sd_grant(disclosures, digests, **payload_over):
    payload = {
        "jti": "dg", "iss": "did:example:a", "sub": "did:example:b", "scope": ["doc:read"],
        "nbf": 0, "exp": 10, "kb": "did:example:b#key-1", "_sd": digests, "_sd_alg": "sha-256", **payload_over,
    }
    token = sign_compact({"alg": "EdDSA", "kid": "did:example:a#key-1"}, payload, private_key_from_seed(SEED))
    return "~".join([token, *disclosures]) + "~"


def test_sd_jwt_disclosure_merged():
    d = make_disclosure("salt", "cst", {"purpose": "x"})
    grant = parse_dg_sd_jwt(_sd_grant([d], [disclosure_digest(d)]))
    assert grant.constraints == {"purpose": "x"}


@pytest.mark.parametrize("case", ["unlisted", "duplicate", "not_json", "bad_alg"])
def test_sd_jwt_disclosure_errors(case):
    d = make_disclosure("salt", "cst", {"purpose": "x"})
    if case == "unlisted":
        token = _sd_grant([d], [])
    elif case == "duplicate":
        token = _sd_grant([d, d], [disclosure_digest(d)])
    elif case == "not_json":
        bogus = base64.urlsafe_b64encode(b"{{").rstrip(b"=").decode()
        token = _sd_grant([bogus], [disclosure_digest(bogus)])
    else:
        token = _sd_grant([d], [disclosure_digest(d)], _sd_alg="sha-512")
    with pytest.raises(FormatError):
        parse_dg_sd_jwt(token)
