"""Account lifecycle: requests, approval, role grants, disabling, termination.

Accounts move through a small state machine::

    Requested --enable--> Active --disable--> Disabled --enable--> Active
        any non-Terminated state --terminate--> Terminated  (absorbing)

Temporary and emergency accounts carry an expiry and are terminated by
:meth:`AccountService.expire_temporaries`; idle accounts are disabled by
:meth:`AccountService.sweep_inactive`.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from .clock import Clock, system_clock
from .errors import (
    AlreadyTerminated,
    InvalidPeriod,
    InvalidRequest,
    InvalidTransition,
    MembershipRefused,
    NotAuthorized,
    RequesterNotActive,
    RequestNotPending,
    TargetNotActive,
    UnknownAccount,
)
from .levels import LOWEST, SensitivityLevel, dominates
from .monitoring import AuditCategory, AuditLog, SYSTEM_ACTOR
from .store import Store


class AccountType(str, Enum):
    INDIVIDUAL = "Individual"
    GROUP = "Group"
    SYSTEM = "System"


class AccountKind(str, Enum):
    PERMANENT = "Permanent"
    TEMPORARY = "Temporary"
    EMERGENCY = "Emergency"


class AccountState(str, Enum):
    REQUESTED = "Requested"
    ACTIVE = "Active"
    DISABLED = "Disabled"
    TERMINATED = "Terminated"


class RequestStatus(str, Enum):
    PENDING = "Pending"
    APPROVED = "Approved"
    REJECTED = "Rejected"


class Role(str, Enum):
    ACCOUNT_MANAGER = "AccountManager"
    END_USER = "EndUser"
    CLASSIFIED_DATA_MANAGER = "ClassifiedDataManager"
    RISK_MANAGER = "RiskManager"
    EVENT_MANAGER = "EventManager"

    @classmethod
    def parse(cls, text: str) -> "Role":
        wanted = text.replace("-", "").replace("_", "").lower()
        for role in cls:
            if role.value.lower() == wanted:
                return role
        raise ValueError(f"unknown role: {text!r}")


EXPIRING_KINDS = frozenset({AccountKind.TEMPORARY, AccountKind.EMERGENCY})

# (operation, state) -> resulting state; anything absent is refused
TRANSITIONS: dict[tuple[str, AccountState], AccountState] = {
    ("enable", AccountState.REQUESTED): AccountState.ACTIVE,
    ("enable", AccountState.DISABLED): AccountState.ACTIVE,
    ("assign_role", AccountState.ACTIVE): AccountState.ACTIVE,
    ("disable", AccountState.REQUESTED): AccountState.DISABLED,
    ("disable", AccountState.ACTIVE): AccountState.DISABLED,
    ("disable", AccountState.DISABLED): AccountState.DISABLED,
    ("terminate", AccountState.REQUESTED): AccountState.TERMINATED,
    ("terminate", AccountState.ACTIVE): AccountState.TERMINATED,
    ("terminate", AccountState.DISABLED): AccountState.TERMINATED,
}


@dataclass
class Account:
    account_id: str
    account_type: AccountType
    kind: AccountKind
    state: AccountState
    last_activity_at: int
    manager_id: str
    roles: set[Role] = field(default_factory=set)
    clearance: SensitivityLevel = LOWEST
    expires_at: int | None = None
    members: set[str] = field(default_factory=set)

    def __post_init__(self) -> None:
        if (self.kind in EXPIRING_KINDS) != (self.expires_at is not None):
            raise ValueError("expires_at must be set exactly for temporary/emergency accounts")
        if self.members and self.account_type is not AccountType.GROUP:
            raise ValueError("only group accounts have members")

    @property
    def is_active(self) -> bool:
        return self.state is AccountState.ACTIVE

    def to_doc(self) -> dict[str, Any]:
        return {
            "account_id": self.account_id,
            "account_type": self.account_type.value,
            "kind": self.kind.value,
            "state": self.state.value,
            "roles": sorted(r.value for r in self.roles),
            "clearance": self.clearance.label,
            "expires_at": self.expires_at,
            "last_activity_at": self.last_activity_at,
            "manager_id": self.manager_id,
            "members": sorted(self.members),
        }

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "Account":
        return cls(
            account_id=doc["account_id"],
            account_type=AccountType(doc["account_type"]),
            kind=AccountKind(doc["kind"]),
            state=AccountState(doc["state"]),
            roles={Role(r) for r in doc["roles"]},
            clearance=SensitivityLevel.parse(doc["clearance"]),
            expires_at=doc["expires_at"],
            last_activity_at=doc["last_activity_at"],
            manager_id=doc["manager_id"],
            members=set(doc["members"]),
        )


@dataclass
class AccountRequest:
    request_id: str
    requester: str
    account_type: AccountType
    kind: AccountKind
    justification: str
    status: RequestStatus = RequestStatus.PENDING
    lifetime_s: int | None = None
    account_id: str | None = None

    def to_doc(self) -> dict[str, Any]:
        return {
            "request_id": self.request_id,
            "requester": self.requester,
            "account_type": self.account_type.value,
            "kind": self.kind.value,
            "justification": self.justification,
            "status": self.status.value,
            "lifetime_s": self.lifetime_s,
            "account_id": self.account_id,
        }

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "AccountRequest":
        return cls(
            request_id=doc["request_id"],
            requester=doc["requester"],
            account_type=AccountType(doc["account_type"]),
            kind=AccountKind(doc["kind"]),
            justification=doc["justification"],
            status=RequestStatus(doc["status"]),
            lifetime_s=doc["lifetime_s"],
            account_id=doc["account_id"],
        )


def _new_id(prefix: str) -> str:
    return f"{prefix}-{secrets.token_hex(6)}"


class AccountService:
    """Owns the persisted accounts and account requests.

    Every successful mutating call appends exactly one audit event.
    """

    def __init__(self, store: Store, audit: AuditLog, clock: Clock = system_clock):
        self.store = store
        self.audit = audit
        self.clock = clock

    # -- lookup
    def find(self, account_id: str) -> Account | None:
        try:
            doc = self.store.load_doc("accounts", account_id)
        except ValueError:
            return None
        return None if doc is None else Account.from_doc(doc)

    def get(self, account_id: str) -> Account:
        account = self.find(account_id)
        if account is None:
            raise UnknownAccount(account_id)
        return account

    def list(self) -> list[Account]:
        return [Account.from_doc(d) for d in self.store.list_docs("accounts")]

    def get_request(self, request_id: str) -> AccountRequest:
        try:
            doc = self.store.load_doc("requests", request_id)
        except ValueError:
            doc = None
        if doc is None:
            raise InvalidRequest(f"unknown request {request_id!r}")
        return AccountRequest.from_doc(doc)

    def list_requests(self) -> list[AccountRequest]:
        return [AccountRequest.from_doc(d) for d in self.store.list_docs("requests")]

    def _save(self, account: Account) -> None:
        self.store.save_doc("accounts", account.account_id, account.to_doc())

    def _require_manager(self, manager_id: str) -> Account:
        manager = self.find(manager_id)
        if manager is None or not manager.is_active or Role.ACCOUNT_MANAGER not in manager.roles:
            raise NotAuthorized(f"{manager_id} is not an active AccountManager")
        return manager

    def _notify(self, account: Account, actor: str, what: str) -> None:
        self.audit.record_event(
            AuditCategory.ACCOUNT_NOTIFICATION,
            f"notify {account.manager_id}: account {account.account_id} {what}",
            actor,
        )

    # -- creation
    def bootstrap(self, account_id: str = "admin", clearance: SensitivityLevel = LOWEST) -> Account:
        """Create the first (system) account holding AccountManager. Only valid on an empty store."""
        with self.store.locked():
            if self.store.list_docs("accounts"):
                raise InvalidRequest("store already has accounts")
            account = Account(
                account_id=account_id,
                account_type=AccountType.SYSTEM,
                kind=AccountKind.PERMANENT,
                state=AccountState.ACTIVE,
                last_activity_at=self.clock(),
                manager_id=account_id,
                roles={Role.ACCOUNT_MANAGER},
                clearance=clearance,
            )
            self._save(account)
            self.audit.record_event(AuditCategory.ACCOUNT_CHANGE, f"bootstrap account {account_id}", SYSTEM_ACTOR)
        return account

    def request_account(self, requester: str, account_type: AccountType, kind: AccountKind,
                        justification: str, lifetime_s: int | None = None) -> AccountRequest:
        """File an application for a new account. Temporary and emergency kinds need a lifetime."""
        with self.store.locked():
            req_acct = self.find(requester)
            if req_acct is None or not req_acct.is_active:
                raise RequesterNotActive(requester)
            if kind in EXPIRING_KINDS:
                if lifetime_s is None or lifetime_s <= 0:
                    raise InvalidRequest(f"{kind.value} accounts need a positive lifetime")
            elif lifetime_s is not None:
                raise InvalidRequest("permanent accounts take no lifetime")
            request = AccountRequest(_new_id("req"), requester, account_type, kind, justification,
                                     lifetime_s=lifetime_s)
            self.store.save_doc("requests", request.request_id, request.to_doc())
            self.audit.record_event(
                AuditCategory.ACCOUNT_CHANGE,
                f"request {request.request_id}: {account_type.value}/{kind.value}",
                requester,
            )
        return request

    def approve_account(self, approver: str, request_id: str, account_id: str | None = None) -> Account:
        with self.store.locked():
            self._require_manager(approver)
            request = self.get_request(request_id)
            if request.status is not RequestStatus.PENDING:
                raise RequestNotPending(request_id)
            account_id = account_id or _new_id("acct")
            if self.find(account_id) is not None:
                raise InvalidRequest(f"account id {account_id!r} already exists")
            now = self.clock()
            account = Account(
                account_id=account_id,
                account_type=request.account_type,
                kind=request.kind,
                state=AccountState.ACTIVE,
                last_activity_at=now,
                manager_id=approver,
                expires_at=None if request.lifetime_s is None else now + request.lifetime_s,
            )
            request.status = RequestStatus.APPROVED
            request.account_id = account_id
            self._save(account)
            self.store.save_doc("requests", request_id, request.to_doc())
            self.audit.record_event(
                AuditCategory.ACCOUNT_CHANGE, f"approve {request_id}: created {account_id}", approver
            )
        return account

    def reject_account(self, approver: str, request_id: str) -> AccountRequest:
        with self.store.locked():
            self._require_manager(approver)
            request = self.get_request(request_id)
            if request.status is not RequestStatus.PENDING:
                raise RequestNotPending(request_id)
            request.status = RequestStatus.REJECTED
            self.store.save_doc("requests", request_id, request.to_doc())
            self.audit.record_event(AuditCategory.ACCOUNT_CHANGE, f"reject {request_id}", approver)
        return request

    # -- modification
    def _transition(self, op: str, account: Account) -> AccountState:
        nxt = TRANSITIONS.get((op, account.state))
        if nxt is not None:
            return nxt
        if account.state is AccountState.TERMINATED and op != "assign_role":
            raise AlreadyTerminated(account.account_id)
        if op == "assign_role":
            raise TargetNotActive(account.account_id)
        raise InvalidTransition(f"{op} not allowed from {account.state.value}")

    def assign_role(self, manager: str, target: str, role: Role, clearance: SensitivityLevel) -> Account:
        """Grant ``role`` and set the clearance of an active account."""
        with self.store.locked():
            self._require_manager(manager)
            account = self.get(target)
            self._transition("assign_role", account)
            account.roles.add(role)
            account.clearance = SensitivityLevel.parse(clearance)
            self._save(account)
            self.audit.record_event(
                AuditCategory.ACCOUNT_CHANGE,
                f"assign {role.value} clearance={account.clearance.label} to {target}",
                manager,
            )
        return account

    def add_member(self, manager: str, group_id: str, member_id: str) -> Account:
        """Admit ``member_id`` to a group; the member's clearance must dominate the group's."""
        with self.store.locked():
            self._require_manager(manager)
            group = self.get(group_id)
            member = self.get(member_id)
            if group.account_type is not AccountType.GROUP:
                raise InvalidRequest(f"{group_id} is not a group account")
            if not group.is_active:
                raise TargetNotActive(group_id)
            if not member.is_active or not dominates(member.clearance, group.clearance):
                raise MembershipRefused(f"{member_id} does not meet the membership condition of {group_id}")
            group.members.add(member_id)
            self._save(group)
            self.audit.record_event(AuditCategory.ACCOUNT_CHANGE, f"add {member_id} to group {group_id}", manager)
        return group

    def enable_account(self, manager: str, target: str) -> Account:
        with self.store.locked():
            self._require_manager(manager)
            account = self.get(target)
            account.state = self._transition("enable", account)
            account.last_activity_at = self.clock()
            self._save(account)
            self.audit.record_event(AuditCategory.ACCOUNT_CHANGE, f"enable {target}", manager)
        return account

    def disable_account(self, manager: str, target: str) -> Account:
        return self._shut(manager, target, "disable")

    def terminate_account(self, manager: str, target: str) -> Account:
        return self._shut(manager, target, "terminate")

    def _shut(self, manager: str, target: str, op: str) -> Account:
        with self.store.locked():
            self._require_manager(manager)
            account = self.get(target)
            account.state = self._transition(op, account)
            self._save(account)
            self._notify(account, manager, f"{account.state.value.lower()} by {manager}")
        return account

    def touch(self, account_id: str, now: int | None = None) -> None:
        """Record activity (login, session use). Not audited on its own."""
        with self.store.locked():
            account = self.find(account_id)
            if account is not None:
                account.last_activity_at = self.clock() if now is None else now
                self._save(account)

    # -- automatic housekeeping
    def expire_temporaries(self, now: int) -> list[str]:
        """Terminate every active temporary/emergency account whose expiry lies strictly before ``now``."""
        expired = []
        with self.store.locked():
            for account in self.list():
                if (account.is_active and account.kind in EXPIRING_KINDS
                        and account.expires_at is not None and account.expires_at < now):
                    account.state = AccountState.TERMINATED
                    self._save(account)
                    self._notify(account, SYSTEM_ACTOR, "terminated on expiry")
                    expired.append(account.account_id)
        return expired

    def sweep_inactive(self, now: int, inactivity_period: int) -> list[str]:
        """Disable active accounts idle for longer than ``inactivity_period`` seconds."""
        if inactivity_period <= 0:
            raise InvalidPeriod(f"inactivity period must be positive, got {inactivity_period}")
        swept = []
        with self.store.locked():
            for account in self.list():
                if account.is_active and now - account.last_activity_at > inactivity_period:
                    account.state = AccountState.DISABLED
                    self._save(account)
                    self._notify(account, SYSTEM_ACTOR, "disabled for inactivity")
                    swept.append(account.account_id)
        return swept

