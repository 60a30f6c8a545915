"""Security-risk policy: operation scoring and DLP content scanning.

The policy is a versioned plain-text document (see ``data/default_policy.conf``).
Scoring multiplies a per-level weight by a per-channel weight and compares the
product against two thresholds; one hard rule denies unencrypted
Confidential/Sensitive data on print or removable media regardless of weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from importlib import resources
from typing import Mapping

from .accounts import Role
from .authn import Identity
from .clock import DAY, Clock, format_timestamp, parse_timestamp, system_clock
from .errors import BadVersion, NotAuthorized, PolicyError
from .levels import SensitivityLevel
from .monitoring import AuditCategory, AuditLog, SYSTEM_ACTOR
from .store import Store

HARD_MEDIA_RULE = "media-unencrypted"


class Channel(str, Enum):
    NETWORK = "Network"
    LOCAL_DISK = "LocalDisk"
    PRINT = "Print"
    REMOVABLE_MEDIA = "RemovableMedia"

    @classmethod
    def parse(cls, text: "str | Channel") -> "Channel":
        if isinstance(text, Channel):
            return text
        wanted = text.replace("-", "").replace("_", "").lower()
        for channel in cls:
            if channel.value.lower() == wanted:
                return channel
        raise ValueError(f"unknown channel: {text!r}")

    @property
    def key(self) -> str:
        return self.value.lower()


PHYSICAL_MEDIA = frozenset({Channel.PRINT, Channel.REMOVABLE_MEDIA})


class Decision(IntEnum):
    """Ordered from most to least permissive."""

    ALLOW = 0
    ALLOW_WITH_ENCRYPTION = 1
    DENY = 2

    def __str__(self) -> str:
        return {0: "Allow", 1: "AllowWithEncryption", 2: "Deny"}[self.value]


@dataclass(frozen=True)
class RiskRule:
    rule_id: str
    floor: SensitivityLevel
    pattern: bytes

    def __post_init__(self) -> None:
        if not self.pattern:
            raise PolicyError(f"rule {self.rule_id}: empty pattern")
        if not self.rule_id or any(c.isspace() for c in self.rule_id):
            raise PolicyError(f"bad rule id {self.rule_id!r}")


@dataclass(frozen=True)
class RiskPolicy:
    version: int
    review_due: int
    level_weights: Mapping[SensitivityLevel, int]
    channel_weights: Mapping[Channel, int]
    encrypt_threshold: int
    deny_threshold: int
    rules: tuple[RiskRule, ...] = ()
    review_period_days: int = 365

    def __post_init__(self) -> None:
        if self.version < 1:
            raise PolicyError("policy version must be >= 1")
        if set(self.level_weights) != set(SensitivityLevel):
            raise PolicyError("a weight is required for every sensitivity level")
        if set(self.channel_weights) != set(Channel):
            raise PolicyError("a weight is required for every channel")
        if any(w < 0 for w in (*self.level_weights.values(), *self.channel_weights.values())):
            raise PolicyError("weights must be non-negative")
        if not self.encrypt_threshold < self.deny_threshold:
            raise PolicyError("encrypt_threshold must be below deny_threshold")
        if self.review_period_days <= 0:
            raise PolicyError("review_period_days must be positive")
        ids = [r.rule_id for r in self.rules]
        if len(ids) != len(set(ids)):
            raise PolicyError("duplicate rule id")


@dataclass(frozen=True)
class RiskVerdict:
    score: int
    decision: Decision
    matched_rule: str | None = None

    @property
    def high_risk(self) -> bool:
        return self.decision is Decision.DENY


@dataclass(frozen=True, order=True)
class DlpFinding:
    offset: int
    pattern_id: str
    floor: SensitivityLevel = field(compare=False)


def assess(policy: RiskPolicy, level: SensitivityLevel, channel: Channel, media_encrypted: bool) -> RiskVerdict:
    """Pure scoring; :meth:`RiskService.assess_operation` adds auditing."""
    score = policy.level_weights[level] * policy.channel_weights[channel]
    if channel in PHYSICAL_MEDIA and not media_encrypted and level >= SensitivityLevel.CONFIDENTIAL:
        return RiskVerdict(score, Decision.DENY, HARD_MEDIA_RULE)
    if score >= policy.deny_threshold:
        return RiskVerdict(score, Decision.DENY)
    if score >= policy.encrypt_threshold:
        return RiskVerdict(score, Decision.ALLOW_WITH_ENCRYPTION)
    return RiskVerdict(score, Decision.ALLOW)


def scan_content(policy: RiskPolicy, payload: bytes) -> list[DlpFinding]:
    """Every (possibly overlapping) occurrence of every rule pattern, ordered by offset then id."""
    findings = []
    for rule in policy.rules:
        start = payload.find(rule.pattern)
        while start != -1:
            findings.append(DlpFinding(start, rule.rule_id, rule.floor))
            start = payload.find(rule.pattern, start + 1)
    findings.sort()
    return findings


def detector_floor(findings: list[DlpFinding]) -> SensitivityLevel:
    return max((f.floor for f in findings), default=SensitivityLevel.PUBLIC)


# --- policy file -----------------------------------------------------------------


def parse_policy(text: str) -> RiskPolicy:
    values: dict[str, str] = {}
    rules: list[RiskRule] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if line.startswith("rule ") or line.startswith("rule\t"):
                _, rule_id, floor, hexbytes = line.split()
                rules.append(RiskRule(rule_id, SensitivityLevel.parse(floor), bytes.fromhex(hexbytes)))
                continue
            key, value = (part.strip() for part in line.split("=", 1))
        except ValueError as exc:
            raise PolicyError(f"policy line {lineno}: {exc or 'malformed'}") from None
        if key in values:
            raise PolicyError(f"policy line {lineno}: duplicate key {key}")
        values[key] = value

    def take_int(key: str, default: int | None = None) -> int:
        if key not in values:
            if default is None:
                raise PolicyError(f"policy is missing {key}")
            return default
        try:
            return int(values.pop(key))
        except ValueError:
            raise PolicyError(f"policy value for {key} is not an integer") from None

    try:
        level_weights = {lvl: take_int(f"level_weight.{lvl.label}") for lvl in SensitivityLevel}
        channel_weights = {ch: take_int(f"channel_weight.{ch.key}") for ch in Channel}
        version = take_int("version")
        encrypt = take_int("encrypt_threshold")
        deny = take_int("deny_threshold")
        period = take_int("review_period_days", 365)
        review_due = parse_timestamp(values.pop("review_due")) if "review_due" in values else 0
    except (KeyError, ValueError) as exc:
        raise PolicyError(str(exc)) from None
    if values:
        raise PolicyError(f"unknown policy keys: {', '.join(sorted(values))}")
    return RiskPolicy(version, review_due, level_weights, channel_weights, encrypt, deny, tuple(rules), period)


def dump_policy(policy: RiskPolicy) -> str:
    lines = [
        f"version={policy.version}",
        f"review_due={format_timestamp(policy.review_due)}",
        f"review_period_days={policy.review_period_days}",
        f"encrypt_threshold={policy.encrypt_threshold}",
        f"deny_threshold={policy.deny_threshold}",
    ]
    lines += [f"level_weight.{lvl.label}={policy.level_weights[lvl]}" for lvl in SensitivityLevel]
    lines += [f"channel_weight.{ch.key}={policy.channel_weights[ch]}" for ch in Channel]
    lines += [f"rule {r.rule_id} {r.floor.label} {r.pattern.hex()}" for r in policy.rules]
    return "\n".join(lines) + "\n"


def default_policy_text() -> str:
    return resources.files("cloudvault").joinpath("data/default_policy.conf").read_text("utf-8")


def default_policy() -> RiskPolicy:
    return parse_policy(default_policy_text())


class RiskService:
    """The persisted policy (``policy.conf``) plus audited assessment."""

    FILE = "policy.conf"

    def __init__(self, store: Store, audit: AuditLog, clock: Clock = system_clock):
        self.store = store
        self.audit = audit
        self.clock = clock

    def current(self) -> RiskPolicy:
        raw = self.store.read_file(self.FILE)
        return default_policy() if raw is None else parse_policy(raw.decode("utf-8"))

    def install(self, policy: RiskPolicy) -> None:
        self.store.write_file(self.FILE, dump_policy(policy).encode("utf-8"))

    def assess_operation(self, level: SensitivityLevel, channel: Channel, media_encrypted: bool,
                         actor: str = SYSTEM_ACTOR, policy: RiskPolicy | None = None) -> RiskVerdict:
        policy = policy or self.current()
        verdict = assess(policy, level, channel, media_encrypted)
        if verdict.decision is Decision.DENY:
            rule = verdict.matched_rule or "deny-threshold"
            self.audit.record_event(
                AuditCategory.RISK_DENY,
                f"high-risk procedure: {level.label} over {channel.value} "
                f"(score={verdict.score}, rule={rule}, policy v{policy.version})",
                actor,
            )
        return verdict

    def scan_content(self, payload: bytes) -> list[DlpFinding]:
        return scan_content(self.current(), payload)

    def update_policy(self, caller: Identity, new_policy: RiskPolicy) -> RiskPolicy:
        """Replace the policy. Requires RiskManager and a version exactly one above the current one."""
        if not caller.has(Role.RISK_MANAGER):
            raise NotAuthorized(f"{caller.account_id} is not a RiskManager")
        with self.store.locked():
            old = self.current()
            if new_policy.version != old.version + 1:
                raise BadVersion(f"expected version {old.version + 1}, got {new_policy.version}")
            installed = replace(new_policy, review_due=self.clock() + new_policy.review_period_days * DAY)
            self.install(installed)
            self.audit.record_event(
                AuditCategory.POLICY_CHANGE,
                f"risk policy v{old.version} -> v{installed.version}, review due "
                f"{format_timestamp(installed.review_due)}",
                caller.account_id,
            )
        return installed
