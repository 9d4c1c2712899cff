from __future__ import annotations

import json
import socket
import threading
import time

import httpx
import pytest
import uvicorn
from fastapi.testclient import TestClient

from dgverify.gateway import CLOCK_HEADER, ConfigError, GatewayConfig, TrustGateway, create_app
from dgverify.harness.fixtures import FIXTURE_EPOCH, envelope_of, request_body
from dgverify.harness.runtime import corpus_config


@pytest.fixture(scope="module")
def alice(corpus_index):
    return corpus_index["credentials"]["alice"], corpus_index["chains"]["alice"]


def _client(corpus, **kwargs):
    return TestClient(create_app(TrustGateway(corpus_config(corpus, **kwargs))))


def test_health_and_capabilities(client):
    status, body = client.get("/health")
    assert status == 200 and body["status"] == "ok" and body["ledger_loaded"]
    status, caps = client.get("/.well-known/verifier-capabilities")
    assert status == 200
    assert caps["supported_profiles"] == ["FEDERATED", "SSI", "HYBRID"]
    assert "anchor-required" in caps["policy_ids"]


def test_non_json_body_is_400(corpus):
    with _client(corpus) as c:
        assert c.post("/verify", content=b"{nope").status_code == 400
        assert c.post("/verify/oidc4vp", content=b"\xff").status_code == 400


def test_unknown_policy_is_404(client, alice):
    status, body = client.post("/verify", request_body("r", alice[0]["jwt"], policy_id="nope"), clock=FIXTURE_EPOCH)
    assert status == 404 and body["error"] == "unknown_policy"


def test_failures_ride_http_200(client, alice):
    status, body = client.post("/verify", {"request_id": "r", "policy_id": "permissive"}, clock=FIXTURE_EPOCH)
    assert status == 200 and body["payload"]["result"] == "E100"
    status, body = client.post("/verify", [1, 2], clock=FIXTURE_EPOCH)
    assert status == 200 and body["payload"]["result"] == "E100"


def test_envelope_matches_direct(client, alice):
    body = request_body("same", alice[0]["ld"], alice[1]["ld"][:2])
    _, direct = client.post("/verify", body, clock=FIXTURE_EPOCH)
    _, wrapped = client.post("/verify/oidc4vp", envelope_of(body), clock=FIXTURE_EPOCH)
    assert direct["payload"] == wrapped["payload"]


def test_clock_header_requires_opt_in(corpus, alice):
    body = request_body("clk", alice[0]["jwt"])
    with _client(corpus, fixed_clock=FIXTURE_EPOCH) as c:
        r = c.post("/verify", json=body, headers={CLOCK_HEADER: str(10**10)}).json()
        assert r["payload"]["checked_at"] == FIXTURE_EPOCH and r["payload"]["result"] == "OK"
    with _client(corpus, fixed_clock=FIXTURE_EPOCH, allow_clock_override=True) as c:
        r = c.post("/verify", json=body, headers={CLOCK_HEADER: str(10**10)}).json()
        assert r["payload"]["checked_at"] == 10**10 and r["payload"]["result"] == "E200"


def test_metrics_sink_is_passive(corpus, alice, tmp_path):
    body = request_body("m", alice[0]["jwt"], alice[1]["sd"])
    sink = tmp_path / "metrics.jsonl"
    with _client(corpus, fixed_clock=FIXTURE_EPOCH) as plain, _client(corpus, fixed_clock=FIXTURE_EPOCH, metrics_path=sink) as observed:
        a = plain.post("/verify", json=body).json()
        b = observed.post("/verify", json=body).json()
    assert a["vro_jws"] == b["vro_jws"]
    (line,) = sink.read_text().splitlines()
    record = json.loads(line)
    assert record["request_id"] == "m" and record["depth"] == 3 and record["result"] == "OK"
    assert record["t_normalize_ms"] + record["t_verify_ms"] <= record["t_server_ms"]


def test_startup_fails_closed(corpus, tmp_path):
    with pytest.raises(ConfigError, match="not registered"):
        GatewayConfig.from_paths(
            corpus / "keys" / "registry.json", corpus / "policies", _foreign_key(tmp_path), corpus / "anchors" / "ledger.jsonl"
        )
    with pytest.raises(ConfigError):
        GatewayConfig.from_paths(tmp_path / "none.json", corpus / "policies", corpus / "keys" / "verifier.json")
    (tmp_path / "policies").mkdir()
    (tmp_path / "policies" / "bad.json").write_text(json.dumps({"policy_id": "bad", "max_chain_depth": -1}))
    with pytest.raises(ConfigError, match="bad.json"):
        GatewayConfig.from_paths(corpus / "keys" / "registry.json", tmp_path / "policies", corpus / "keys" / "verifier.json")
    broken_ledger = tmp_path / "ledger.jsonl"
    broken_ledger.write_text("garbage\n")
    with pytest.raises(ConfigError, match="ledger"):
        GatewayConfig.from_paths(
            corpus / "keys" / "registry.json", corpus / "policies", corpus / "keys" / "verifier.json", broken_ledger
        )


def _foreign_key(tmp_path):
    path = tmp_path / "foreign.json"
    path.write_text(json.dumps({"key_id": "did:example:verifier#key-1", "seed": "A" * 43}))
    return path


def _free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def test_real_http_server(corpus, alice):
    port = _free_port()
    app = create_app(TrustGateway(corpus_config(corpus, fixed_clock=FIXTURE_EPOCH)))
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port, log_level="warning"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    try:
        deadline = time.time() + 10
        while not server.started and time.time() < deadline:
            time.sleep(0.05)
        base = f"http://127.0.0.1:{port}"
        with httpx.Client(base_url=base, timeout=10) as c:
            assert c.get("/health").json()["status"] == "ok"
            r = c.post("/verify", json=request_body("http", alice[0]["jwt"], alice[1]["sd"][:2]))
            assert r.status_code == 200 and r.json()["payload"]["result"] == "OK"
    finally:
        server.should_exit = True
        thread.join(timeout=10)
