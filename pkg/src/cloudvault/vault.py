"""Wires every service over one store."""

from __future__ import annotations

import os
from importlib import resources
from pathlib import Path

from .accounts import AccountService, Role
from .authn import DEFAULT_KDF_ITERATIONS, Authenticator, Identity
from .classification import Classifier
from .clock import Clock, system_clock
from .config import Config, parse_config, with_setting
from .errors import NotAuthorized, StoreUnavailable
from .gateway import Gateway
from .levels import HIGHEST
from .monitoring import AuditLog, ControlRegistry, ImpactReport
from .records import RecordArchive
from .risk import RiskPolicy, RiskService, default_policy
from .sealing import KeyRing
from .store import LocalStore, Store

HOME_ENV = "CLOUDVAULT_HOME"
CONFIG_FILE = "config.conf"
KEYRING_FILE = "keyring.bin"


def default_home() -> Path:
    return Path(os.environ.get(HOME_ENV) or Path.home() / ".cloudvault")


class Vault:
    def __init__(self, store: Store, *, config: Config | None = None, keyring: KeyRing | None = None,
                 clock: Clock = system_clock, kdf_iterations: int = DEFAULT_KDF_ITERATIONS):
        self.store = store
        self.clock = clock
        if config is None:
            raw = store.read_file(CONFIG_FILE)
            config = parse_config(raw.decode("utf-8")) if raw else Config()
        if keyring is None:
            raw = store.read_file(KEYRING_FILE)
            if raw is None:
                raise StoreUnavailable("store has no keyring; run `cloudvault init` first")
            keyring = KeyRing.from_bytes(raw)
        self.config = config
        self.keyring = keyring
        self.audit = AuditLog(store, clock)
        self.accounts = AccountService(store, self.audit, clock)
        self.authn = Authenticator(store, self.accounts, self.audit, clock, max_attempts=config.max_attempts,
                                   token_ttl=config.token_ttl_s, kdf_iterations=kdf_iterations)
        self.risk = RiskService(store, self.audit, clock)
        self.classifier = Classifier(self.accounts, self.audit, self.risk.current, clock)
        self.archive = RecordArchive(store, keyring, self.audit)
        self.controls = ControlRegistry(store, self.audit, clock, config.accreditation_period_days)
        self.gateway = Gateway(self.authn, self.classifier, self.risk, self.archive, keyring, self.audit, config)

    @classmethod
    def open(cls, home: str | os.PathLike[str] | None = None, **kwargs) -> "Vault":
        root = Path(home) if home is not None else default_home()
        if not (root / KEYRING_FILE).exists():
            raise StoreUnavailable(f"{root} is not an initialised cloudvault store")
        return cls(LocalStore(root), **kwargs)

    @classmethod
    def initialize(cls, store: Store, admin_name: str, admin_passw: str, *, admin_id: str = "admin",
                   config: Config | None = None, keyring: KeyRing | None = None,
                   policy: RiskPolicy | None = None, clock: Clock = system_clock,
                   kdf_iterations: int = DEFAULT_KDF_ITERATIONS) -> "Vault":
        """Lay down keyring, config, policy and controls, and create the first account manager."""
        config = config or Config()
        keyring = keyring or KeyRing.generate()
        with store.locked():
            if store.read_file(KEYRING_FILE) is not None:
                raise StoreUnavailable("store is already initialised")
            store.write_file(KEYRING_FILE, keyring.to_bytes(), private=True)
            store.write_file(CONFIG_FILE, config.to_text().encode("utf-8"))
            vault = cls(store, config=config, keyring=keyring, clock=clock, kdf_iterations=kdf_iterations)
            vault.risk.install(policy or default_policy())
            controls = resources.files("cloudvault").joinpath("data/default_controls.conf").read_bytes()
            store.write_file(ControlRegistry.FILE, controls)
            vault.accounts.bootstrap(admin_id, clearance=HIGHEST)
            vault.authn.register_credentials(None, admin_id, admin_name, admin_passw)
        return vault

    def identity(self, token_id: str) -> Identity:
        return self.authn.resolve_session(token_id)

    def update_setting(self, caller: Identity, key: str, value: str) -> tuple[Config, ImpactReport]:
        """Change one config value (AccountManager only) and flag the controls it touches."""
        if not caller.has(Role.ACCOUNT_MANAGER):
            raise NotAuthorized(f"{caller.account_id} may not change configuration")
        new = with_setting(self.config, key, value)
        self.store.write_file(CONFIG_FILE, new.to_text().encode("utf-8"))
        report = self.controls.apply_impact(f"config {key}={value}", [key], caller.account_id)
        return new, report

    def update_policy(self, caller: Identity, policy: RiskPolicy) -> tuple[RiskPolicy, ImpactReport]:
        installed = self.risk.update_policy(caller, policy)
        report = self.controls.apply_impact(f"risk policy v{installed.version}", ["risk_policy"], caller.account_id)
        return installed, report
