"""Exception hierarchy shared by every cloudvault module."""

from __future__ import annotations


class CloudVaultError(Exception):
    """Base class for all errors raised by cloudvault."""


class NotAuthorized(CloudVaultError):
    pass


# accounts
class AccountError(CloudVaultError):
    pass


class RequesterNotActive(AccountError):
    pass


class RequestNotPending(AccountError):
    pass


class TargetNotActive(AccountError):
    pass


class AlreadyTerminated(AccountError):
    pass


class InvalidTransition(AccountError):
    pass


class InvalidPeriod(AccountError):
    pass


class InvalidRequest(AccountError):
    pass


class UnknownAccount(AccountError):
    pass


class MembershipRefused(AccountError):
    pass


# authn
class AuthError(CloudVaultError):
    pass


class BadCredentials(AuthError):
    """Wrong name or password. Retryable while attempts remain."""

    def __init__(self, message: str = "bad credentials", attempts_left: int | None = None):
        super().__init__(message)
        self.attempts_left = attempts_left


class UnknownName(BadCredentials):
    """Internal-only distinction; renders exactly like BadCredentials."""


class AccountLocked(AuthError):
    pass


class AccountNotActive(AuthError):
    pass


class NameTaken(AuthError):
    pass


class UnknownToken(AuthError):
    pass


class ExpiredToken(AuthError):
    pass


class SessionInvalid(AuthError):
    pass


# classification
class UnknownOwner(CloudVaultError):
    pass


# risk
class PolicyError(CloudVaultError):
    pass


class BadVersion(PolicyError):
    pass


# sealing
class SealingError(CloudVaultError):
    pass


class TestProfileForbidden(SealingError):
    __test__ = False  # keep pytest from collecting this as a test class


class PayloadTooLarge(SealingError):
    pass


class BadNonceLength(SealingError):
    pass


class UnknownKey(SealingError):
    pass


class MalformedRecord(SealingError):
    pass


class VerifyFailed(SealingError):
    pass


class DigestMismatch(SealingError):
    pass


# storage / config
class StoreError(CloudVaultError):
    pass


class StoreUnavailable(StoreError):
    pass


class NotFound(StoreError):
    pass


class ConfigError(CloudVaultError):
    pass


class UnknownConfigKey(ConfigError):
    """Config file names a key that does not exist."""


class BadValue(ConfigError):
    pass
