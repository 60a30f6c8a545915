import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_env
from oracles import lockout_run
from cloudvault import AccountState
from cloudvault.errors import (
    AccountLocked,
    AccountNotActive,
    BadCredentials,
    ExpiredToken,
    NameTaken,
    UnknownName,
    UnknownToken,
)


def test_register_initial_state(env):
    env.user("alice", "s3cret")
    rec = env.vault.authn.get_record("alice")
    assert rec.locked is False and rec.failed_attempts == 0
    assert rec.account_id == "alice"


def test_duplicate_name(env):
    env.user("alice")
    env.user("bob")
    with pytest.raises(NameTaken):
        env.vault.authn.register_credentials("admin", "bob", "alice", "x")


def test_register_for_disabled_account(env):
    env.user("alice")
    env.vault.accounts.disable_account("admin", "alice")
    with pytest.raises(AccountNotActive):
        env.vault.authn.register_credentials("admin", "alice", "alice2", "x")


def test_login_ok(env):
    env.user("alice", "s3cret")
    token = env.vault.authn.logged_user("alice", "s3cret")
    assert token.log is True and token.account_id == "alice"


def test_wrong_password_once(env):
    env.user("alice", "s3cret")
    with pytest.raises(BadCredentials) as info:
        env.vault.authn.logged_user("alice", "nope")
    assert info.value.attempts_left == 2
    assert env.vault.authn.get_record("alice").failed_attempts == 1


def test_three_wrong_then_locked(env):
    env.user("alice", "s3cret")
    for _ in range(3):
        with pytest.raises(BadCredentials):
            env.vault.authn.logged_user("alice", "nope")
    assert env.vault.authn.get_record("alice").locked
    with pytest.raises(AccountLocked):
        env.vault.authn.logged_user("alice", "s3cret")
    env.vault.authn.unlock("admin", "alice")
    assert env.vault.authn.logged_user("alice", "s3cret")


def test_unknown_name_looks_like_bad_credentials(env):
    with pytest.raises(BadCredentials) as info:
        env.vault.authn.logged_user("ghost", "x")
    assert isinstance(info.value, UnknownName)


def test_disabled_account_cannot_login(env):
    env.user("alice", "pw")
    env.vault.accounts.disable_account("admin", "alice")
    with pytest.raises(AccountNotActive):
        env.vault.authn.logged_user("alice", "pw")


def test_each_login_attempt_audited(env):
    env.user("alice", "pw")
    n = len(env.vault.audit)
    env.vault.authn.logged_user("alice", "pw")
    with pytest.raises(BadCredentials):
        env.vault.authn.logged_user("alice", "bad")
    assert len(env.vault.audit) == n + 2


def test_resolve_fresh_token(env):
    env.user("alice", "pw")
    token = env.vault.authn.logged_user("alice", "pw")
    who = env.vault.authn.resolve_session(token.token_id)
    assert who.account_id == "alice"
    assert who.clearance == env.vault.accounts.get("alice").clearance


def test_token_ttl_boundary(env):
    env.user("alice", "pw")
    token = env.vault.authn.logged_user("alice", "pw")
    env.clock.advance(env.vault.config.token_ttl_s)
    env.vault.authn.resolve_session(token.token_id)
    env.clock.advance(1)
    with pytest.raises(ExpiredToken):
        env.vault.authn.resolve_session(token.token_id)


def test_random_token_unknown(env):
    with pytest.raises(UnknownToken):
        env.vault.authn.resolve_session("not-a-token")


def test_logout_invalidates(env):
    env.user("alice", "pw")
    token = env.vault.authn.logged_user("alice", "pw")
    env.vault.authn.logout(token.token_id)
    with pytest.raises(UnknownToken):
        env.vault.authn.resolve_session(token.token_id)


def test_no_plaintext_password_persisted(disk_env):
    secret = "correct horse battery staple"
    disk_env.user("alice", secret)
    token = disk_env.vault.authn.logged_user("alice", secret)
    for path, data in disk_env.vault.store.iter_persisted():
        assert secret.encode() not in data, path
        assert token.token_id.encode() not in data, path


def run_sequence(attempts, max_attempts=3):
    env = make_env()
    env.user("u", "right")
    got = []
    for good in attempts:
        try:
            env.vault.authn.logged_user("u", "right" if good else "wrong")
            got.append("ok")
        except AccountLocked:
            got.append("locked")
        except BadCredentials:
            got.append("bad")
    return got, env.vault.authn.get_record("u").locked


def all_sequences(max_len):
    for n in range(max_len + 1):
        yield from itertools.product((True, False), repeat=n)


@pytest.mark.parametrize("attempts", list(all_sequences(4)), ids=lambda a: "".join("G" if x else "B" for x in a) or "empty")
def test_lockout_matches_automaton(attempts):
    assert run_sequence(attempts) == lockout_run(attempts)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["a", "b", "c"]), st.booleans(),
                          st.sampled_from(["active", "disabled", "locked"])), min_size=1, max_size=6))
def test_success_iff_match_active_unlocked(population):
    """Login succeeds exactly when the password matches, the account is Active and not locked."""
    env = make_env()
    seen = {}
    for name, good, status in population:
        if name in seen:
            continue
        seen[name] = status
        env.user(name, "pw-" + name)
        if status == "disabled":
            env.vault.accounts.disable_account("admin", name)
        elif status == "locked":
            for _ in range(3):
                with pytest.raises(BadCredentials):
                    env.vault.authn.logged_user(name, "x")
    for name, good, _ in population:
        status = seen[name]
        expect = good and status == "active"
        try:
            env.vault.authn.logged_user(name, "pw-" + name if good else "nope")
            ok = True
        except (BadCredentials, AccountLocked, AccountNotActive):
            ok = False
        assert ok == expect
        if not good and status == "active":
            # do not let repeated failures in one population lock an active account
            env.vault.authn.unlock("admin", name)
    assert all(env.vault.accounts.get(n).state is (AccountState.ACTIVE if s != "disabled" else AccountState.DISABLED)
               for n, s in seen.items())
