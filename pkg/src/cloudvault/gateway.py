"""The end-to-end data-security procedure.

``data_security`` runs, in this order and stopping at the first refusal::

    logged_user -> verification -> classify -> assess_operation
    -> privacy_policy -> authenticate_data -> encrypt_data
    -> authentication_code -> put_record -> secure_data -> logout

and reports one of four messages: ``secured``, ``wrong secured``,
``access denied`` or ``login failed``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .authn import Authenticator, Identity, SessionToken
from .classification import Classifier, DataItem, preview_level
from .config import Config
from .errors import (
    AccountLocked,
    AccountNotActive,
    AuthError,
    BadCredentials,
    CloudVaultError,
    NotAuthorized,
    SessionInvalid,
    UnknownOwner,
)
from .levels import dominates
from .monitoring import AuditCategory, AuditLog
from .records import RecordArchive
from .risk import Channel, Decision, RiskService, RiskVerdict
from .sealing import KeyRing, SealedRecord, privacy_policy, seal, secure_data

log = logging.getLogger(__name__)

Reprompt = Callable[[], "tuple[str, str]"]


class Message(str, Enum):
    SECURED = "secured"
    WRONG_SECURED = "wrong secured"
    ACCESS_DENIED = "access denied"
    LOGIN_FAILED = "login failed"

    def __str__(self) -> str:
        return self.value


@dataclass
class PipelineState:
    log: bool = False
    verify: bool = False
    secured: bool = False
    session: SessionToken | None = None
    record: SealedRecord | None = None
    raised: list[str] = field(default_factory=list)

    def raise_flag(self, name: str) -> None:
        """Flip one of log/verify/secured to true; each may flip once, in that order."""
        prerequisite = {"log": None, "verify": "log", "secured": "verify"}[name]
        if getattr(self, name):
            raise RuntimeError(f"{name} already set")
        if prerequisite and not getattr(self, prerequisite):
            raise RuntimeError(f"{name} requires {prerequisite}")
        setattr(self, name, True)
        self.raised.append(name)


@dataclass
class Outcome:
    message: Message
    state: PipelineState
    record_ref: str | None = None
    verdict: RiskVerdict | None = None
    trace: list[str] = field(default_factory=list)

    @property
    def secured(self) -> bool:
        return self.message is Message.SECURED


class Gateway:
    def __init__(self, authn: Authenticator, classifier: Classifier, risk: RiskService,
                 archive: RecordArchive, keyring: KeyRing, audit: AuditLog, config: Config):
        self.authn = authn
        self.classifier = classifier
        self.risk = risk
        self.archive = archive
        self.keyring = keyring
        self.audit = audit
        self.config = config

    def _identity(self, token_id: str) -> Identity:
        try:
            return self.authn.resolve_session(token_id)
        except AuthError as exc:
            raise SessionInvalid(str(exc)) from exc

    def verification(self, token_id: str, item: DataItem) -> bool:
        """Does the session's account have duties and a clearance covering the item?"""
        who = self._identity(token_id)
        if not who.roles:
            return False
        return dominates(who.clearance, preview_level(item, self.risk.current()))

    def data_security(self, name: str, passw: str, item: DataItem, channel: Channel | str, *,
                      media_encrypted: bool = False, reprompt: Reprompt | None = None) -> Outcome:
        """Log in, then protect and store ``item``.

        On bad credentials ``reprompt`` (if given) is asked for a fresh
        name/password, up to ``config.max_attempts`` attempts in total.
        """
        state = PipelineState()
        outcome = Outcome(Message.LOGIN_FAILED, state)
        attempts = 0
        while True:
            attempts += 1
            try:
                token = self.authn.logged_user(name, passw)
                break
            except BadCredentials:
                outcome.trace.append("logged_user")
                if reprompt is None or attempts >= self.config.max_attempts:
                    return outcome
                name, passw = reprompt()
            except (AccountLocked, AccountNotActive):
                outcome.trace.append("logged_user")
                return outcome
        outcome.trace.append("logged_user")
        state.session = token
        state.raise_flag("log")
        return self._protect(token.token_id, item, Channel.parse(channel), media_encrypted, outcome)

    def secure_with_session(self, token: SessionToken | str, item: DataItem, channel: Channel | str, *,
                            media_encrypted: bool = False) -> Outcome:
        """Same as :meth:`data_security` for a caller who already holds a session."""
        token_id = token.token_id if isinstance(token, SessionToken) else token
        state = PipelineState()
        outcome = Outcome(Message.LOGIN_FAILED, state)
        try:
            self._identity(token_id)
        except SessionInvalid:
            return outcome
        if isinstance(token, SessionToken):
            state.session = token
        state.raise_flag("log")
        return self._protect(token_id, item, Channel.parse(channel), media_encrypted, outcome)

    def _protect(self, token_id: str, item: DataItem, channel: Channel, media_encrypted: bool,
                 outcome: Outcome) -> Outcome:
        try:
            return self._run(token_id, item, channel, media_encrypted, outcome)
        finally:
            self.authn.logout(token_id)
            outcome.trace.append("logout")

    def _deny(self, outcome: Outcome, actor: str, why: str) -> Outcome:
        self.audit.record_event(AuditCategory.VERIFY_FAIL, why, actor)
        outcome.message = Message.ACCESS_DENIED
        return outcome

    def _run(self, token_id: str, item: DataItem, channel: Channel, media_encrypted: bool,
             outcome: Outcome) -> Outcome:
        state, trace = outcome.state, outcome.trace
        try:
            who = self._identity(token_id)
        except SessionInvalid:
            outcome.message = Message.LOGIN_FAILED
            return outcome

        verified = self.verification(token_id, item)
        trace.append("verification")
        if not verified:
            reason = "no assigned duties" if not who.roles else "clearance below data level"
            return self._deny(outcome, who.account_id, f"verification refused: {reason}")
        state.raise_flag("verify")

        try:
            classified = self.classifier.classify(who, item)
        except (NotAuthorized, UnknownOwner) as exc:
            return self._deny(outcome, who.account_id, f"classification refused: {exc}")
        trace.append("classify")

        verdict = self.risk.assess_operation(classified.level, channel, media_encrypted, who.account_id)
        trace.append("assess_operation")
        outcome.verdict = verdict
        if verdict.decision is Decision.DENY:
            outcome.message = Message.ACCESS_DENIED
            return outcome

        profile = privacy_policy(classified.level, self.config,
                                 require_encryption=verdict.decision is Decision.ALLOW_WITH_ENCRYPTION)
        trace.append("privacy_policy")
        record = seal(item.payload, classified.level, profile, self.keyring, trace=trace)
        state.record = record

        try:
            record_id = self.archive.put_record(record, who.account_id)
            trace.append("put_record")
            stored = self.archive.get_record_bytes(record_id)
        except CloudVaultError as exc:
            log.warning("storing sealed record failed: %s", exc)
            self.audit.record_event(AuditCategory.VERIFY_FAIL, f"store failure: {exc}", who.account_id)
            outcome.message = Message.WRONG_SECURED
            return outcome

        ok = secure_data(stored, self.keyring)
        trace.append("secure_data")
        if not ok:
            self.audit.record_event(AuditCategory.VERIFY_FAIL, f"stored record {record_id} failed verification",
                                    who.account_id)
            self.archive.delete_record(record_id)
            outcome.message = Message.WRONG_SECURED
            return outcome
        state.raise_flag("secured")
        outcome.record_ref = record_id
        outcome.message = Message.SECURED
        return outcome
