"""Continuous security monitoring.

Two halves: a hash-chained, append-only audit log, and a scheduler that tracks
when each security control is due for assessment (critical controls at least
yearly, the rest once per accreditation cycle).
"""

from __future__ import annotations

import configparser
import hashlib
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

from .clock import DAY, Clock, format_timestamp, parse_timestamp, system_clock
from .errors import StoreUnavailable
from .store import Store

GENESIS_HASH = "0" * 64
SYSTEM_ACTOR = "system"
DEFAULT_ACCREDITATION_DAYS = 1095


class AuditCategory(str, Enum):
    LOGIN = "Login"
    ACCOUNT_CHANGE = "AccountChange"
    ACCOUNT_NOTIFICATION = "AccountNotification"
    CLASSIFICATION = "Classification"
    RISK_DENY = "RiskDeny"
    SEAL = "Seal"
    VERIFY_FAIL = "VerifyFail"
    POLICY_CHANGE = "PolicyChange"
    CONTROL_ASSESSMENT = "ControlAssessment"
    RISK_REVIEW_REQUESTED = "RiskReviewRequested"


@dataclass(frozen=True)
class AuditEvent:
    seq: int
    timestamp: int
    actor: str
    category: AuditCategory
    detail: str
    prev_hash: str
    hash: str

    def body(self) -> dict:
        return {
            "actor": self.actor,
            "category": self.category.value,
            "detail": self.detail,
            "seq": self.seq,
            "ts": self.timestamp,
        }

    def to_line(self) -> bytes:
        doc = self.body()
        doc["prev_hash"] = self.prev_hash
        doc["hash"] = self.hash
        return _dumps(doc) + b"\n"


def _dumps(doc: dict) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def chain_hash(prev_hash: str, body: dict) -> str:
    """SHA-256 over the previous hash (raw bytes) followed by the canonical event body."""
    return hashlib.sha256(bytes.fromhex(prev_hash) + _dumps(body)).hexdigest()


@dataclass(frozen=True)
class ChainReport:
    ok: bool
    first_bad: int | None
    length: int

    def __bool__(self) -> bool:
        return self.ok


def _parse_line(raw: bytes, expected_seq: int, prev_hash: str) -> AuditEvent | None:
    try:
        doc = json.loads(raw.decode("utf-8"))
        event = AuditEvent(
            seq=doc["seq"],
            timestamp=doc["ts"],
            actor=doc["actor"],
            category=AuditCategory(doc["category"]),
            detail=doc["detail"],
            prev_hash=doc["prev_hash"],
            hash=doc["hash"],
        )
    except (ValueError, KeyError, TypeError):
        return None
    if set(doc) != {"actor", "category", "detail", "seq", "ts", "prev_hash", "hash"}:
        return None
    if type(event.seq) is not int or type(event.timestamp) is not int:
        return None
    if event.seq != expected_seq or event.prev_hash != prev_hash:
        return None
    if event.hash != chain_hash(prev_hash, event.body()):
        return None
    # any byte-level variation of an otherwise valid event is still tampering
    if event.to_line() != raw + b"\n":
        return None
    return event


def verify_chain_bytes(data: bytes) -> ChainReport:
    """Check a serialized audit log; reports the first line whose event is not intact."""
    if not data:
        return ChainReport(True, None, 0)
    lines = data.split(b"\n")
    trailing = lines.pop()
    prev = GENESIS_HASH
    for index, raw in enumerate(lines):
        event = _parse_line(raw, index, prev)
        if event is None:
            return ChainReport(False, index, len(lines))
        prev = event.hash
    if trailing:
        return ChainReport(False, len(lines), len(lines))
    return ChainReport(True, None, len(lines))


def parse_events(data: bytes) -> list[AuditEvent]:
    """Parse every intact event, stopping at the first broken one."""
    events = []
    prev = GENESIS_HASH
    for index, raw in enumerate(data.split(b"\n")[:-1]):
        event = _parse_line(raw, index, prev)
        if event is None:
            break
        events.append(event)
        prev = event.hash
    return events


class AuditLog:
    """Append-only event log persisted through a :class:`Store`."""

    def __init__(self, store: Store, clock: Clock = system_clock):
        self.store = store
        self.clock = clock

    def _tail(self) -> tuple[int, str]:
        last = self.store.read_audit_tail()
        if not last:
            return 0, GENESIS_HASH
        doc = json.loads(last)
        return doc["seq"] + 1, doc["hash"]

    def record_event(self, category: AuditCategory, detail: str, actor: str = SYSTEM_ACTOR,
                     timestamp: int | None = None) -> AuditEvent:
        with self.store.locked():
            try:
                seq, prev = self._tail()
            except (OSError, ValueError, KeyError) as exc:
                raise StoreUnavailable(f"audit log unreadable: {exc}") from exc
            ts = self.clock() if timestamp is None else timestamp
            body = {"actor": actor, "category": category.value, "detail": detail, "seq": seq, "ts": ts}
            event = AuditEvent(seq, ts, actor, category, detail, prev, chain_hash(prev, body))
            try:
                self.store.append_audit(event.to_line())
            except OSError as exc:
                raise StoreUnavailable(str(exc)) from exc
            return event

    def verify_chain(self) -> ChainReport:
        return verify_chain_bytes(self.store.read_audit())

    def events(self) -> list[AuditEvent]:
        return parse_events(self.store.read_audit())

    def tail(self, n: int = 10) -> list[AuditEvent]:
        return self.events()[-n:] if n > 0 else []

    def __len__(self) -> int:
        return self.store.read_audit().count(b"\n")


# --- control assessment scheduling -------------------------------------------------


@dataclass
class SecurityControl:
    control_id: str
    description: str = ""
    critical: bool = False
    period_days: int = 365
    last_assessed_at: int | None = None
    config_keys: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if self.period_days <= 0:
            raise ValueError(f"{self.control_id}: period_days must be positive")
        if self.critical and self.period_days > 365:
            raise ValueError(f"{self.control_id}: critical controls need period_days <= 365")


@dataclass(frozen=True)
class ImpactReport:
    change_ref: str
    affected_controls: frozenset[str]

    @property
    def requires_reassessment(self) -> bool:
        return bool(self.affected_controls)


def assessments_due(controls: Iterable[SecurityControl], now: int,
                    accreditation_period_days: int = DEFAULT_ACCREDITATION_DAYS) -> list[str]:
    """Ids of controls whose assessment is overdue at ``now`` (strictly past the period)."""
    due = []
    for control in controls:
        if control.last_assessed_at is None:
            due.append(control.control_id)
            continue
        days = control.period_days if control.critical else accreditation_period_days
        if now - control.last_assessed_at > days * DAY:
            due.append(control.control_id)
    return due


def impact_analysis(change_ref: str, changed_keys: Iterable[str],
                    control_map: Mapping[str, Iterable[str]]) -> ImpactReport:
    affected: set[str] = set()
    for key in changed_keys:
        affected.update(control_map.get(key, ()))
    return ImpactReport(change_ref, frozenset(affected))


def control_map_of(controls: Iterable[SecurityControl]) -> dict[str, set[str]]:
    mapping: dict[str, set[str]] = {}
    for control in controls:
        for key in control.config_keys:
            mapping.setdefault(key, set()).add(control.control_id)
    return mapping


def parse_controls(text: str) -> list[SecurityControl]:
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_string(text)
    controls = []
    for cid in parser.sections():
        sec = parser[cid]
        last = sec.get("last_assessed_at", "").strip()
        keys = sec.get("config_keys", "")
        controls.append(
            SecurityControl(
                control_id=cid,
                description=sec.get("description", ""),
                critical=sec.getboolean("critical", fallback=False),
                period_days=sec.getint("period_days", fallback=365),
                last_assessed_at=parse_timestamp(last) if last else None,
                config_keys=frozenset(k.strip() for k in keys.split(",") if k.strip()),
            )
        )
    return controls


def dump_controls(controls: Iterable[SecurityControl]) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    for c in controls:
        parser[c.control_id] = {
            "description": c.description,
            "critical": "true" if c.critical else "false",
            "period_days": str(c.period_days),
            "config_keys": ", ".join(sorted(c.config_keys)),
        }
        if c.last_assessed_at is not None:
            parser[c.control_id]["last_assessed_at"] = format_timestamp(c.last_assessed_at)
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


class ControlRegistry:
    """The persisted set of security controls (``controls.conf``)."""

    FILE = "controls.conf"

    def __init__(self, store: Store, audit: AuditLog, clock: Clock = system_clock,
                 accreditation_period_days: int = DEFAULT_ACCREDITATION_DAYS):
        self.store = store
        self.audit = audit
        self.clock = clock
        self.accreditation_period_days = accreditation_period_days

    def load(self) -> list[SecurityControl]:
        raw = self.store.read_file(self.FILE)
        return parse_controls(raw.decode("utf-8")) if raw else []

    def save(self, controls: Iterable[SecurityControl]) -> None:
        self.store.write_file(self.FILE, dump_controls(controls).encode("utf-8"))

    def due(self, now: int | None = None) -> list[str]:
        now = self.clock() if now is None else now
        return assessments_due(self.load(), now, self.accreditation_period_days)

    def assess(self, control_id: str, actor: str, now: int | None = None, note: str = "") -> SecurityControl:
        now = self.clock() if now is None else now
        with self.store.locked():
            controls = self.load()
            for control in controls:
                if control.control_id == control_id:
                    break
            else:
                raise KeyError(f"unknown control: {control_id}")
            control.last_assessed_at = now
            self.save(controls)
            detail = f"assessed {control_id}" + (f": {note}" if note else "")
            self.audit.record_event(AuditCategory.CONTROL_ASSESSMENT, detail, actor, timestamp=now)
        return control

    def apply_impact(self, change_ref: str, changed_keys: Iterable[str], actor: str = SYSTEM_ACTOR) -> ImpactReport:
        """Run impact analysis and clear the assessment date of every affected control."""
        with self.store.locked():
            controls = self.load()
            report = impact_analysis(change_ref, changed_keys, control_map_of(controls))
            if report.requires_reassessment:
                for control in controls:
                    if control.control_id in report.affected_controls:
                        control.last_assessed_at = None
                self.save(controls)
                self.audit.record_event(
                    AuditCategory.CONTROL_ASSESSMENT,
                    f"impact of {change_ref}: reassess {', '.join(sorted(report.affected_controls))}",
                    actor,
                )
        return report
