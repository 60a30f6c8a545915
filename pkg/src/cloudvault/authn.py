"""Credentials, login with lockout, and session tokens."""

from __future__ import annotations

import hashlib
import hmac
import secrets
from dataclasses import dataclass
from typing import Any

from .accounts import AccountService, Role
from .clock import Clock, system_clock
from .errors import (
    AccountLocked,
    AccountNotActive,
    BadCredentials,
    ExpiredToken,
    NameTaken,
    NotAuthorized,
    UnknownName,
    UnknownToken,
)
from .levels import SensitivityLevel
from .monitoring import AuditCategory, AuditLog, SYSTEM_ACTOR
from .store import Store

DEFAULT_MAX_ATTEMPTS = 3
DEFAULT_TOKEN_TTL = 3600
DEFAULT_KDF_ITERATIONS = 200_000
MAX_NAME_LEN = 64


def password_digest(salt: bytes, passw: str, iterations: int) -> bytes:
    return hashlib.pbkdf2_hmac("sha256", passw.encode("utf-8"), salt, iterations)


def _name_key(name: str) -> str:
    return "n" + name.encode("utf-8").hex()


def _token_key(token_id: str) -> str:
    return hashlib.sha256(token_id.encode("utf-8")).hexdigest()[:40]


@dataclass
class CredentialRecord:
    account_id: str
    name: str
    salt: bytes
    password_digest: bytes
    iterations: int
    failed_attempts: int = 0
    locked: bool = False

    def to_doc(self) -> dict[str, Any]:
        return {
            "account_id": self.account_id,
            "name": self.name,
            "salt": self.salt.hex(),
            "password_digest": self.password_digest.hex(),
            "iterations": self.iterations,
            "failed_attempts": self.failed_attempts,
            "locked": self.locked,
        }

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "CredentialRecord":
        return cls(
            account_id=doc["account_id"],
            name=doc["name"],
            salt=bytes.fromhex(doc["salt"]),
            password_digest=bytes.fromhex(doc["password_digest"]),
            iterations=doc["iterations"],
            failed_attempts=doc["failed_attempts"],
            locked=doc["locked"],
        )


@dataclass(frozen=True)
class SessionToken:
    token_id: str
    account_id: str
    issued_at: int
    log: bool = True


@dataclass(frozen=True)
class Identity:
    """Who a session belongs to, as resolved at call time."""

    account_id: str
    roles: frozenset[Role]
    clearance: SensitivityLevel

    def has(self, role: Role) -> bool:
        return role in self.roles


class Authenticator:
    def __init__(self, store: Store, accounts: AccountService, audit: AuditLog, clock: Clock = system_clock,
                 *, max_attempts: int = DEFAULT_MAX_ATTEMPTS, token_ttl: int = DEFAULT_TOKEN_TTL,
                 kdf_iterations: int = DEFAULT_KDF_ITERATIONS):
        if max_attempts <= 0 or token_ttl <= 0 or kdf_iterations <= 0:
            raise ValueError("max_attempts, token_ttl and kdf_iterations must be positive")
        self.store = store
        self.accounts = accounts
        self.audit = audit
        self.clock = clock
        self.max_attempts = max_attempts
        self.token_ttl = token_ttl
        self.kdf_iterations = kdf_iterations

    def get_record(self, name: str) -> CredentialRecord | None:
        try:
            doc = self.store.load_doc("credentials", _name_key(name))
        except ValueError:
            return None
        return None if doc is None else CredentialRecord.from_doc(doc)

    def _save(self, record: CredentialRecord) -> None:
        self.store.save_doc("credentials", _name_key(record.name), record.to_doc())

    def _require_manager(self, manager: str) -> None:
        acct = self.accounts.find(manager)
        if acct is None or not acct.is_active or Role.ACCOUNT_MANAGER not in acct.roles:
            raise NotAuthorized(f"{manager} is not an active AccountManager")

    def register_credentials(self, manager: str | None, account_id: str, name: str, passw: str) -> CredentialRecord:
        """Store a salted password digest for ``account_id`` under login ``name``.

        ``manager=None`` is reserved for store bootstrap, where no manager exists yet.
        """
        if not name or len(name) > MAX_NAME_LEN:
            raise ValueError(f"login name must be 1..{MAX_NAME_LEN} characters")
        with self.store.locked():
            if manager is not None:
                self._require_manager(manager)
            account = self.accounts.find(account_id)
            if account is None or not account.is_active:
                raise AccountNotActive(account_id)
            if self.get_record(name) is not None:
                raise NameTaken(name)
            salt = secrets.token_bytes(16)
            record = CredentialRecord(account_id, name, salt,
                                      password_digest(salt, passw, self.kdf_iterations), self.kdf_iterations)
            self._save(record)
            self.audit.record_event(AuditCategory.ACCOUNT_CHANGE, f"credentials registered for {account_id}",
                                    manager or SYSTEM_ACTOR)
        return record

    def unlock(self, manager: str, name: str) -> CredentialRecord:
        with self.store.locked():
            self._require_manager(manager)
            record = self.get_record(name)
            if record is None:
                raise UnknownName()
            record.failed_attempts = 0
            record.locked = False
            self._save(record)
            self.audit.record_event(AuditCategory.ACCOUNT_CHANGE, f"credentials unlocked for {record.account_id}",
                                    manager)
        return record

    def logged_user(self, name: str, passw: str) -> SessionToken:
        """Authenticate and issue a session token (``log`` = true).

        Raises BadCredentials (retryable; UnknownName looks identical from the
        outside), AccountLocked or AccountNotActive.
        """
        with self.store.locked():
            record = self.get_record(name)
            if record is None:
                # burn comparable time so unknown names are not distinguishable by latency
                password_digest(b"\0" * 16, passw, self.kdf_iterations)
                self.audit.record_event(AuditCategory.LOGIN, "login failed: unknown name", SYSTEM_ACTOR)
                raise UnknownName("bad credentials", attempts_left=None)
            if record.locked:
                self.audit.record_event(AuditCategory.LOGIN, "login refused: locked", record.account_id)
                raise AccountLocked(f"credentials for {name!r} are locked")
            expected = password_digest(record.salt, passw, record.iterations)
            if not hmac.compare_digest(expected, record.password_digest):
                record.failed_attempts += 1
                record.locked = record.failed_attempts >= self.max_attempts
                if record.locked:
                    record.failed_attempts = self.max_attempts
                self._save(record)
                left = self.max_attempts - record.failed_attempts
                self.audit.record_event(
                    AuditCategory.LOGIN,
                    f"login failed: bad password ({record.failed_attempts}/{self.max_attempts})"
                    + ("; locked" if record.locked else ""),
                    record.account_id,
                )
                raise BadCredentials("bad credentials", attempts_left=left)
            account = self.accounts.find(record.account_id)
            if account is None or not account.is_active:
                state = account.state.value if account else "missing"
                self.audit.record_event(AuditCategory.LOGIN, f"login refused: account {state}", record.account_id)
                raise AccountNotActive(f"account is {state}")
            now = self.clock()
            if record.failed_attempts:
                record.failed_attempts = 0
                self._save(record)
            self.accounts.touch(account.account_id, now)
            token = SessionToken(secrets.token_urlsafe(32), account.account_id, now)
            self.store.save_doc("sessions", _token_key(token.token_id),
                                {"account_id": token.account_id, "issued_at": now, "log": True})
            self.audit.record_event(AuditCategory.LOGIN, "login ok", account.account_id)
        return token

    def resolve_session(self, token_id: str) -> Identity:
        """Return the identity bound to a live token and mark the account active now."""
        try:
            doc = self.store.load_doc("sessions", _token_key(token_id))
        except ValueError:
            doc = None
        if doc is None:
            raise UnknownToken("unknown session")
        now = self.clock()
        if now - doc["issued_at"] > self.token_ttl:
            self.store.delete_doc("sessions", _token_key(token_id))
            raise ExpiredToken("session expired")
        account = self.accounts.find(doc["account_id"])
        if account is None or not account.is_active:
            raise AccountNotActive("session account is not active")
        self.accounts.touch(account.account_id, now)
        return Identity(account.account_id, frozenset(account.roles), account.clearance)

    def logout(self, token_id: str) -> None:
        self.store.delete_doc("sessions", _token_key(token_id))
