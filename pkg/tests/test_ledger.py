from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgverify.ledger import AnchorState, AnchorStore, DuplicateActive, LedgerError
from dgverify.model import Clock

from .strategies import FINGERPRINT_POOL

FP = "ab" * 32


def test_lookup_states(tmp_path):
    store = AnchorStore(tmp_path / "l.jsonl")
    assert store.lookup(FP, Clock(1)) is AnchorState.ABSENT
    store.anchor(FP, Clock(1), expires_at=10)
    assert store.lookup(FP, Clock(10)) is AnchorState.ACTIVE
    assert store.lookup(FP, Clock(11)) is AnchorState.EXPIRED
    store.revoke(FP, Clock(5))
    assert store.lookup(FP, Clock(6)) is AnchorState.REVOKED


def test_duplicate_active_and_reanchor(tmp_path):
    store = AnchorStore(tmp_path / "l.jsonl")
    store.anchor(FP, Clock(1))
    with pytest.raises(DuplicateActive):
        store.anchor(FP, Clock(2))
    store.revoke(FP, Clock(3))
    store.anchor(FP, Clock(4))
    assert store.lookup(FP, Clock(5)) is AnchorState.ACTIVE
    assert [r.block_id for r in store.records] == [1, 2, 3]


def test_expired_anchor_can_be_renewed():
    store = AnchorStore()
    store.anchor(FP, Clock(1), expires_at=2)
    store.anchor(FP, Clock(3))
    assert store.lookup(FP, Clock(4)) is AnchorState.ACTIVE


def test_revoke_requires_active_record():
    store = AnchorStore()
    with pytest.raises(LedgerError):
        store.revoke(FP, Clock(1))
    store.anchor(FP, Clock(1))
    store.revoke(FP, Clock(2))
    with pytest.raises(LedgerError):
        store.revoke(FP, Clock(3))


@pytest.mark.parametrize("fp", ["AB" * 32, "ab" * 31, "zz" * 32, ""])
def test_fingerprint_shape(fp):
    with pytest.raises(LedgerError):
        AnchorStore().anchor(fp, Clock(1))


@pytest.mark.parametrize(
    "lines",
    [
        ["{not json"],
        [json.dumps({"fingerprint": FP, "block_id": 2, "anchored_at": 1, "status": "ACTIVE"}),
         json.dumps({"fingerprint": FP, "block_id": 2, "anchored_at": 1, "status": "REVOKED"})],
        [json.dumps({"fingerprint": FP, "block_id": 1, "anchored_at": 1, "status": "PENDING"})],
        [json.dumps({"fingerprint": FP, "block_id": "1", "anchored_at": 1, "status": "ACTIVE"})],
    ],
)
def test_corrupt_logs_are_refused(tmp_path, lines):
    path = tmp_path / "l.jsonl"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(LedgerError):
        AnchorStore(path)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["anchor", "revoke"]), st.sampled_from(FINGERPRINT_POOL)), max_size=15))
def test_log_only_grows_by_appending(tmp_path_factory, ops):
    path = tmp_path_factory.mktemp("ledger") / "l.jsonl"
    store = AnchorStore(path)
    previous = b""
    for now, (op, fp) in enumerate(ops, 1):
        try:
            getattr(store, op)(fp, Clock(now))
        except LedgerError:
            pass
        current = path.read_bytes() if path.exists() else b""
        assert current.startswith(previous)
        assert current.count(b"\n") == len(store)
        previous = current
    reloaded = AnchorStore(path)
    assert reloaded.records == store.records
    for fp in FINGERPRINT_POOL:
        assert reloaded.lookup(fp, Clock(10**6)) is store.lookup(fp, Clock(10**6))
