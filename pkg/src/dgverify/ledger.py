"""Mock anchoring ledger: an append-only JSON-lines log of chain fingerprints."""

from __future__ import annotations

import enum
import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .model import canonical_serialize, is_fingerprint


class AnchorStatus(str, enum.Enum):
    ACTIVE = "ACTIVE"
    REVOKED = "REVOKED"


class AnchorState(str, enum.Enum):
    ACTIVE = "ACTIVE"
    REVOKED = "REVOKED"
    EXPIRED = "EXPIRED"
    ABSENT = "ABSENT"


class LedgerError(Exception):
    pass


class DuplicateActive(LedgerError):
    pass


@dataclass(frozen=True)
class AnchorRecord:
    fingerprint: str
    block_id: int
    anchored_at: int
    expires_at: Optional[int]
    status: AnchorStatus

    @classmethod
    def from_json(cls, data) -> "AnchorRecord":
        if not isinstance(data, dict) or not is_fingerprint(data.get("fingerprint")):
            raise LedgerError("bad anchor record")
        try:
            rec = cls(
                data["fingerprint"],
                data["block_id"],
                data["anchored_at"],
                data.get("expires_at"),
                AnchorStatus(data["status"]),
            )
        except (KeyError, ValueError) as exc:
            raise LedgerError(f"bad anchor record: {exc}") from None
        for value in (rec.block_id, rec.anchored_at) + ((rec.expires_at,) if rec.expires_at is not None else ()):
            if not isinstance(value, int) or isinstance(value, bool):
                raise LedgerError("bad anchor record: non-integer field")
        return rec


def _resolve(rec: Optional[AnchorRecord], now: int) -> AnchorState:
    if rec is None:
        return AnchorState.ABSENT
    if rec.status is AnchorStatus.REVOKED:
        return AnchorState.REVOKED
    if rec.expires_at is not None and now > rec.expires_at:
        return AnchorState.EXPIRED
    return AnchorState.ACTIVE


class AnchorStore:
    """Single-writer, multi-reader anchor log.

    With ``path=None`` the log lives in memory only. Lookups read an index of
    the last record per fingerprint, rebuilt incrementally on append.
    """

    def __init__(self, path=None):
        self.path = Path(path) if path is not None else None
        self._records: list[AnchorRecord] = []
        self._latest: dict[str, AnchorRecord] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            for lineno, line in enumerate(self.path.read_text(encoding="utf-8").splitlines(), 1):
                if not line.strip():
                    continue
                try:
                    rec = AnchorRecord.from_json(json.loads(line))
                except json.JSONDecodeError:
                    raise LedgerError(f"line {lineno} is not JSON") from None
                self._index(rec)

    def _index(self, rec: AnchorRecord) -> None:
        if self._records and rec.block_id <= self._records[-1].block_id:
            raise LedgerError(f"block_id {rec.block_id} does not increase")
        self._records.append(rec)
        self._latest[rec.fingerprint] = rec

    @property
    def records(self) -> tuple[AnchorRecord, ...]:
        return tuple(self._records)

    def __len__(self) -> int:
        return len(self._records)

    def _append(self, rec: AnchorRecord) -> AnchorRecord:
        if self.path is not None:
            with self.path.open("ab") as fh:
                fh.write(canonical_serialize(rec) + b"\n")
        self._index(rec)
        return rec

    def _next_block(self) -> int:
        return self._records[-1].block_id + 1 if self._records else 1

    def anchor(self, fingerprint: str, clock, expires_at: Optional[int] = None) -> AnchorRecord:
        if not is_fingerprint(fingerprint):
            raise LedgerError("fingerprint must be 64 lowercase hex characters")
        with self._lock:
            if _resolve(self._latest.get(fingerprint), clock.now) is AnchorState.ACTIVE:
                raise DuplicateActive(fingerprint)
            rec = AnchorRecord(fingerprint, self._next_block(), clock.now, expires_at, AnchorStatus.ACTIVE)
            return self._append(rec)

    def revoke(self, fingerprint: str, clock) -> AnchorRecord:
        with self._lock:
            last = self._latest.get(fingerprint)
            if last is None or last.status is AnchorStatus.REVOKED:
                raise LedgerError(f"no anchor to revoke for {fingerprint}")
            rec = AnchorRecord(
                fingerprint, self._next_block(), clock.now, last.expires_at, AnchorStatus.REVOKED
            )
            return self._append(rec)

    def lookup(self, fingerprint: str, clock) -> AnchorState:
        return _resolve(self._latest.get(fingerprint), clock.now)
