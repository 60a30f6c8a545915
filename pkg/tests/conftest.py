from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

import pytest

from cloudvault import AccountKind, AccountType, Config, MemoryStore, Role, SensitivityLevel, Vault
from cloudvault.sealing import KeyRing

sys.path.insert(0, str(Path(__file__).parent / "oracles"))

T0 = 1_700_000_000
ADMIN_NAME, ADMIN_PASSW = "root", "root-pw"
FAST_KDF = 1_000
GOLDEN_DIR = Path(__file__).parent / "golden"


class FakeClock:
    def __init__(self, now: int = T0):
        self.now = now

    def __call__(self) -> int:
        return self.now

    def advance(self, seconds: int) -> None:
        self.now += seconds


@dataclass
class Env:
    vault: Vault
    clock: FakeClock
    mark: int = 0  # audit length just before the call under test

    @property
    def admin(self) -> str:
        return "admin"

    def user(self, account_id: str, passw: str = "pw", *, roles=(Role.END_USER,),
             clearance=SensitivityLevel.CONFIDENTIAL, kind=AccountKind.PERMANENT, lifetime=None,
             account_type=AccountType.INDIVIDUAL) -> str:
        """Create an active account with credentials ``account_id``/``passw``."""
        acc = self.vault.accounts
        req = acc.request_account(self.admin, account_type, kind, "fixture", lifetime)
        acc.approve_account(self.admin, req.request_id, account_id)
        for role in roles:
            acc.assign_role(self.admin, account_id, role, clearance)
        self.vault.authn.register_credentials(self.admin, account_id, account_id, passw)
        return account_id


def make_env(store=None, *, config: Config | None = None, keyring: KeyRing | None = None,
             clock: FakeClock | None = None) -> Env:
    clock = clock or FakeClock()
    vault = Vault.initialize(store if store is not None else MemoryStore(), ADMIN_NAME, ADMIN_PASSW,
                             config=config, keyring=keyring, clock=clock, kdf_iterations=FAST_KDF)
    return Env(vault, clock)


@pytest.fixture
def clock() -> FakeClock:
    return FakeClock()


@pytest.fixture
def env(clock) -> Env:
    return make_env(clock=clock)


@pytest.fixture
def disk_env(tmp_path, clock) -> Env:
    from cloudvault import LocalStore

    return make_env(LocalStore(tmp_path / "home", durable=False), clock=clock)


@pytest.fixture
def golden_keyring() -> KeyRing:
    import json

    manifest = json.loads((GOLDEN_DIR / "manifest.json").read_text())
    return KeyRing({manifest["key_id"]: bytes.fromhex(manifest["key_hex"])}, manifest["key_id"])


def fixture_log(n: int, seed: int = 0):
    """An AuditLog over a MemoryStore holding ``n`` pseudo-random events."""
    import random

    from cloudvault import AuditCategory, AuditLog

    rng = random.Random(seed)
    clock = FakeClock()
    log = AuditLog(MemoryStore(), clock)
    cats = list(AuditCategory)
    for i in range(n):
        clock.advance(rng.randrange(1, 5000))
        detail = "".join(rng.choice("abcdefghij éß0123456789\"\\") for _ in range(rng.randrange(0, 30)))
        log.record_event(rng.choice(cats), detail, rng.choice(["system", "admin", f"u{i % 7}"]))
    return log


class CorruptingStore(MemoryStore):
    """Returns stored records with one bit flipped, as a faulty backend would."""

    def read_record(self, record_id: str) -> bytes:
        data = bytearray(super().read_record(record_id))
        data[len(data) // 2] ^= 0x10
        return bytes(data)


PIPELINE_ORDER = ["logged_user", "verification", "classify", "assess_operation", "privacy_policy",
                  "authenticate_data", "encrypt_data", "authentication_code", "put_record", "secure_data"]
PROFILES = {
    "no-roles": dict(roles=(), clearance=SensitivityLevel.SENSITIVE),
    "low": dict(roles=(Role.END_USER,), clearance=SensitivityLevel.INTERNAL),
    "high": dict(roles=(Role.END_USER,), clearance=SensitivityLevel.SENSITIVE),
}


def grid_case(cred_valid: bool, profile: str, level: int, channel: str, *, corrupt: bool = False, seed: int = 0):
    """Run one data_security call in a fresh vault. Returns (outcome, env, payload)."""
    import random

    from cloudvault import DataItem

    env = make_env(CorruptingStore() if corrupt else MemoryStore())
    opts = PROFILES[profile]
    env.user("u", "right", roles=opts["roles"], clearance=SensitivityLevel.PUBLIC)
    if not opts["roles"]:
        # clearance can only be granted with a role; grant then strip the duty
        doc = env.vault.store.load_doc("accounts", "u")
        doc["clearance"] = opts["clearance"].label
        env.vault.store.save_doc("accounts", "u", doc)
    else:
        for role in opts["roles"]:
            env.vault.accounts.assign_role("admin", "u", role, opts["clearance"])
    payload = b"plain-" + random.Random(seed).randbytes(24).hex().encode()
    item = DataItem(payload, "u", SensitivityLevel(level))
    env.mark = len(env.vault.audit)
    outcome = env.vault.gateway.data_security("u", "right" if cred_valid else "wrong", item, channel)
    return outcome, env, payload


def trace_ok(outcome) -> bool:
    """Steps ran in pipeline order, stopped at the first refusal, and logout closed every session."""
    trace = list(outcome.trace)
    while len(trace) > 1 and trace[0] == trace[1] == "logged_user":
        trace.pop(0)
    logged_in = outcome.state.log
    if logged_in:
        if not trace or trace[-1] != "logout" or trace.count("logout") != 1:
            return False
        trace = trace[:-1]
    elif "logout" in trace:
        return False
    if trace != PIPELINE_ORDER[:len(trace)]:
        return False
    raised = outcome.state.raised
    if raised != ["log", "verify", "secured"][:len(raised)]:
        return False
    return outcome.state.secured == (outcome.message.value == "secured")


def leaks(store, payload: bytes) -> list[str]:
    return [name for name, data in store.iter_persisted() if payload in data]


ACCEPTANCE_RESULTS: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[n])
