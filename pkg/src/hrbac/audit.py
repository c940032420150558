"""Append-only, hash-chained audit log.

Canonical encoding, bit-exact: each entry is one line of JSON with keys
sorted and compact separators ("," and ":").  The hashed portion is the
same JSON object *without* the entry_hash key, UTF-8 encoded; entry_hash
is the SHA-256 hex of those bytes.  prev_hash is the previous entry's
entry_hash, or 64 zero hex digits for seq 1.  Timestamps are RFC 3339
UTC with microsecond precision and a "Z" suffix.

Field order inside the hashed object (after key sorting):
action, actor, decision, override_flag, prev_hash, reason, resource,
seq, ts.

An append is durable (flushed and fsynced when file-backed) before the
triggering operation may report success; if the append fails, the
operation must fail (the audit-or-abort contract).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from typing import IO, Iterator, Optional

from .errors import FormatError, IoError, ValidationError

GENESIS_HASH = "0" * 64


class AuditAction(Enum):
    UPLOAD = "Upload"
    DOWNLOAD = "Download"
    OVERRIDE = "Override"
    GRANT = "Grant"
    REVOKE = "Revoke"
    ROTATE = "Rotate"
    POLICY_CHANGE = "PolicyChange"
    AUTH_FAIL = "AuthFail"


def _rfc3339(ts: float) -> str:
    return (
        datetime.fromtimestamp(ts, tz=timezone.utc)
        .isoformat(timespec="microseconds")
        .replace("+00:00", "Z")
    )


@dataclass(frozen=True)
class AuditEntry:
    seq: int
    ts: str
    actor: str
    action: str
    resource: Optional[str]
    decision: str  # "Allow" | "Deny"
    reason: str
    override_flag: bool
    prev_hash: str
    entry_hash: str

    def hashed_payload(self) -> bytes:
        fields = {
            "seq": self.seq,
            "ts": self.ts,
            "actor": self.actor,
            "action": self.action,
            "resource": self.resource,
            "decision": self.decision,
            "reason": self.reason,
            "override_flag": self.override_flag,
            "prev_hash": self.prev_hash,
        }
        return json.dumps(fields, sort_keys=True, separators=(",", ":")).encode("utf-8")

    def to_line(self) -> str:
        fields = json.loads(self.hashed_payload())
        fields["entry_hash"] = self.entry_hash
        return json.dumps(fields, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_line(cls, line: str) -> "AuditEntry":
        try:
            fields = json.loads(line)
            return cls(
                seq=fields["seq"],
                ts=fields["ts"],
                actor=fields["actor"],
                action=fields["action"],
                resource=fields["resource"],
                decision=fields["decision"],
                reason=fields["reason"],
                override_flag=fields["override_flag"],
                prev_hash=fields["prev_hash"],
                entry_hash=fields["entry_hash"],
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise FormatError(f"bad audit line: {exc}") from None


class AuditLog:
    """Hash-chained log, optionally persisted as newline-delimited records.

    Appends are serialized by the caller together with store mutations;
    queries read a consistent in-memory snapshot.
    """

    def __init__(self, path: Optional[str] = None) -> None:
        self._path = path
        self._entries: list[AuditEntry] = []
        self._fh: Optional[IO[str]] = None
        if path is not None and os.path.exists(path):
            with open(path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        self._entries.append(AuditEntry.from_line(line))

    @property
    def head(self) -> Optional[AuditEntry]:
        return self._entries[-1] if self._entries else None

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[AuditEntry]:
        return iter(self._entries)

    def append(
        self,
        *,
        ts: float,
        actor: str,
        action: AuditAction,
        decision: str,
        reason: str,
        resource: Optional[str] = None,
        override_flag: bool = False,
    ) -> AuditEntry:
        if override_flag and action is not AuditAction.OVERRIDE:
            raise ValidationError("override_flag requires the Override action")
        prev_hash = self._entries[-1].entry_hash if self._entries else GENESIS_HASH
        entry = AuditEntry(
            seq=len(self._entries) + 1,
            ts=_rfc3339(ts),
            actor=actor,
            action=action.value,
            resource=resource,
            decision=decision,
            reason=reason,
            override_flag=override_flag,
            prev_hash=prev_hash,
            entry_hash="",
        )
        entry = dataclasses.replace(
            entry, entry_hash=hashlib.sha256(entry.hashed_payload()).hexdigest()
        )
        self._write_line(entry.to_line())
        self._entries.append(entry)
        return entry

    def _write_line(self, line: str) -> None:
        if self._path is None:
            return
        try:
            if self._fh is None:
                self._fh = open(self._path, "a", encoding="utf-8")
            self._fh.write(line + "\n")
            self._fh.flush()
            os.fsync(self._fh.fileno())
        except OSError as exc:
            raise IoError(f"audit append failed: {exc}") from exc

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def query(
        self,
        *,
        actor: Optional[str] = None,
        action: Optional[AuditAction] = None,
        decision: Optional[str] = None,
        ts_from: Optional[float] = None,
        ts_to: Optional[float] = None,
        limit: Optional[int] = None,
    ) -> list[AuditEntry]:
        """Matching entries in seq order; ``limit`` keeps the most recent."""
        low = _rfc3339(ts_from) if ts_from is not None else None
        high = _rfc3339(ts_to) if ts_to is not None else None
        matched = [
            e
            for e in self._entries
            if (actor is None or e.actor == actor)
            and (action is None or e.action == action.value)
            and (decision is None or e.decision == decision)
            and (low is None or e.ts >= low)
            and (high is None or e.ts <= high)
        ]
        if limit is not None:
            matched = matched[-limit:]
        return matched


def verify_chain(entries: list[AuditEntry]) -> tuple[bool, Optional[int]]:
    """Recompute the whole chain; returns (ok, first bad seq)."""
    prev_hash = GENESIS_HASH
    for position, entry in enumerate(entries, start=1):
        recomputed = hashlib.sha256(entry.hashed_payload()).hexdigest()
        if entry.seq != position or entry.prev_hash != prev_hash or entry.entry_hash != recomputed:
            return False, position
        prev_hash = entry.entry_hash
    return True, None


def verify_file(path: str) -> tuple[bool, Optional[int]]:
    entries = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    entries.append(AuditEntry.from_line(line))
    except OSError as exc:
        raise IoError(f"cannot read audit log: {exc}") from exc
    return verify_chain(entries)
