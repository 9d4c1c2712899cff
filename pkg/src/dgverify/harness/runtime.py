"""Gateway wiring for the harness: corpus-backed config and HTTP-ish clients."""

from __future__ import annotations

import warnings
from pathlib import Path
from typing import Optional

import httpx

from ..gateway import CLOCK_HEADER, GatewayConfig, TrustGateway, create_app


def corpus_config(corpus_dir, **kwargs) -> GatewayConfig:
    root = Path(corpus_dir)
    return GatewayConfig.from_paths(
        root / "keys" / "registry.json",
        root / "policies",
        root / "keys" / "verifier.json",
        root / "anchors" / "ledger.jsonl",
        **kwargs,
    )


def in_process_gateway(corpus_dir, **kwargs) -> TrustGateway:
    return TrustGateway(corpus_config(corpus_dir, **kwargs))


class GatewayClient:
    """Thin JSON client. ``clock`` is sent as the verifier clock header."""

    def __init__(self, client: httpx.Client):
        self._client = client

    @classmethod
    def remote(cls, endpoint: str, timeout: float = 30.0) -> "GatewayClient":
        return cls(httpx.Client(base_url=endpoint.rstrip("/"), timeout=timeout))

    @classmethod
    def in_process(cls, corpus_dir, **kwargs) -> "GatewayClient":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            from fastapi.testclient import TestClient

        kwargs.setdefault("allow_clock_override", True)
        app = create_app(in_process_gateway(corpus_dir, **kwargs))
        return cls(TestClient(app))

    def post(self, path: str, body, clock: Optional[int] = None) -> tuple[int, dict]:
        headers = {CLOCK_HEADER: str(clock)} if clock is not None else {}
        resp = self._client.post(path, json=body, headers=headers)
        return resp.status_code, resp.json()

    def get(self, path: str) -> tuple[int, dict]:
        resp = self._client.get(path)
        return resp.status_code, resp.json()

    def close(self) -> None:
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
