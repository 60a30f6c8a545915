"""Labeling data with a sensitivity level.

The assigned level is the maximum of the caller's label and the floor raised by
DLP pattern hits, so content inspection can only push a level upward.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .accounts import AccountService, Role
from .authn import Identity
from .clock import Clock, system_clock
from .errors import NotAuthorized, UnknownOwner
from .levels import SensitivityLevel, dominates
from .monitoring import AuditCategory, AuditLog
from .risk import RiskPolicy, detector_floor, scan_content

__all__ = ["DataItem", "ClassifiedData", "Classifier", "preview_level", "dominates"]


@dataclass(frozen=True)
class DataItem:
    payload: bytes
    owner: str
    label: SensitivityLevel | None = None


@dataclass(frozen=True)
class ClassifiedData:
    item: DataItem
    level: SensitivityLevel
    classified_by: str
    classified_at: int


def preview_level(item: DataItem, policy: RiskPolicy) -> SensitivityLevel:
    """Level ``classify`` would assign, computed without side effects."""
    floor = detector_floor(scan_content(policy, item.payload))
    label = item.label if item.label is not None else SensitivityLevel.PUBLIC
    return max(label, floor)


class Classifier:
    def __init__(self, accounts: AccountService, audit: AuditLog, policy: Callable[[], RiskPolicy],
                 clock: Clock = system_clock):
        self.accounts = accounts
        self.audit = audit
        self.policy = policy
        self.clock = clock

    def classify(self, caller: Identity, item: DataItem) -> ClassifiedData:
        if not (caller.has(Role.CLASSIFIED_DATA_MANAGER) or caller.account_id == item.owner):
            raise NotAuthorized(f"{caller.account_id} may not classify data owned by {item.owner}")
        if self.accounts.find(item.owner) is None:
            raise UnknownOwner(item.owner)
        policy = self.policy()
        findings = scan_content(policy, item.payload)
        floor = detector_floor(findings)
        label = item.label if item.label is not None else SensitivityLevel.PUBLIC
        level = max(label, floor)
        result = ClassifiedData(item, level, caller.account_id, self.clock())
        rules = ",".join(sorted({f.pattern_id for f in findings})) or "none"
        self.audit.record_event(
            AuditCategory.CLASSIFICATION,
            f"classified {len(item.payload)} bytes of {item.owner} as {level.label} "
            f"(label={label.label}, dlp={rules})",
            caller.account_id,
        )
        return result

    def reclassify(self, caller: Identity, classified: ClassifiedData,
                   new_level: SensitivityLevel) -> ClassifiedData:
        """Issue a new classification and ask the risk side to re-review standing verdicts."""
        if not caller.has(Role.CLASSIFIED_DATA_MANAGER):
            raise NotAuthorized(f"{caller.account_id} is not a ClassifiedDataManager")
        new_level = SensitivityLevel.parse(new_level)
        result = ClassifiedData(classified.item, new_level, caller.account_id, self.clock())
        self.audit.record_event(
            AuditCategory.RISK_REVIEW_REQUESTED,
            f"reclassified data of {classified.item.owner}: {classified.level.label} -> {new_level.label}",
            caller.account_id,
        )
        return result
