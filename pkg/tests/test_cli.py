import io

import pytest

from cloudvault.cli import cli_dispatch


class Run:
    def __init__(self, home):
        self.home = home

    def __call__(self, *argv, stdin=""):
        out, err = io.StringIO(), io.StringIO()
        code = cli_dispatch(["--home", str(self.home), *argv], stdin=io.StringIO(stdin), stdout=out, stderr=err)
        return code, out.getvalue(), err.getvalue()


@pytest.fixture(scope="module")
def cv(tmp_path_factory):
    run = Run(tmp_path_factory.mktemp("home"))
    assert run("init", "--name", "root", stdin="root-pw\n")[0] == 0
    assert run("login", "--name", "root", stdin="root-pw\n")[0] == 0
    code, out, _ = run("account", "request", "--justification", "new hire")
    req = out.split()[0]
    assert run("account", "approve", req, "--account-id", "alice") == (0, "alice Active\n", "")
    assert run("account", "assign-role", "alice", "--role", "end-user", "--clearance", "confidential")[0] == 0
    assert run("account", "register", "alice", "--name", "alice", stdin="a-pw\n")[0] == 0
    return run


def test_seal_after_login_prints_secured(cv, tmp_path):
    f = tmp_path / "f"
    f.write_bytes(b"plain report")
    assert cv("login", "--name", "alice", stdin="a-pw\n")[0] == 0
    code, out, err = cv("seal", "--level", "public", "--in", str(f), "--channel", "network")
    assert (code, out) == (0, "secured\n")
    rid = err.split()[-1]
    assert cv("verify", "--id", rid) == (0, "secured\n", "")
    # the session was consumed by seal
    assert cv("seal", "--level", "public", "--in", str(f), "--channel", "network")[0] == 1


def test_seal_with_name_and_denial(cv, tmp_path):
    f = tmp_path / "f"
    f.write_bytes(b"TOP SECRET")
    code, out, _ = cv("seal", "--name", "alice", "--in", str(f), "--channel", "localdisk", stdin="a-pw\n")
    assert (code, out) == (1, "access denied\n")


def test_seal_bad_password_then_retry(cv, tmp_path):
    f = tmp_path / "f"
    f.write_bytes(b"x")
    code, out, _ = cv("seal", "--name", "alice", "--in", str(f), "--channel", "localdisk", stdin="nope\na-pw\n")
    assert (code, out) == (0, "secured\n")


def test_open_round_trip(cv, tmp_path):
    f = tmp_path / "f"
    f.write_bytes(b"roundtrip me")
    _, _, err = cv("seal", "--name", "alice", "--in", str(f), "--channel", "localdisk", stdin="a-pw\n")
    rid = err.split()[-1]
    assert cv("login", "--name", "alice", stdin="a-pw\n")[0] == 0
    out_file = tmp_path / "out"
    assert cv("open", "--id", rid, "--out", str(out_file))[0] == 0
    assert out_file.read_bytes() == b"roundtrip me"
    cv("get", rid, "--out", str(tmp_path / "copy.cvs"))
    assert cv("verify", str(tmp_path / "copy.cvs"))[0] == 0
    cv("logout")


def test_verify_tampered_file(cv, tmp_path):
    bad = tmp_path / "bad.cvs"
    bad.write_bytes(b"CVS1 not really")
    assert cv("verify", str(bad)) == (1, "wrong secured\n", "")


def test_audit_verify(cv):
    code, out, _ = cv("audit", "verify")
    assert code == 0 and out.startswith("chain OK")
    assert cv("audit", "tail", "-n", "3")[1].count("\n") == 3


def test_audit_broken(cv):
    log = cv.home / "audit.log"
    original = log.read_bytes()
    try:
        log.write_bytes(original.replace(b'"seq":1,', b'"seq":7,', 1))
        code, out, _ = cv("audit", "verify")
        assert (code, out) == (1, "chain BROKEN at event 1\n")
    finally:
        log.write_bytes(original)


def test_controls_due(cv):
    code, out, _ = cv("controls", "due", "--now", "2025-01-01")
    assert code == 0
    assert set(out.split()) == {"account-management", "audit-chain-integrity", "record-sealing",
                                "risk-assessment", "security-assessment"}


def test_risk_check(cv):
    assert cv("risk", "check", "--level", "sensitive", "--channel", "removable-media") == \
        (0, "Deny score=9 rule=media-unencrypted\n", "")
    assert cv("risk", "check", "--level", "public", "--channel", "localdisk")[1] == "Allow score=0\n"


def test_risk_scan(cv, tmp_path):
    f = tmp_path / "f"
    f.write_bytes(b"IBAN and SSN:")
    assert cv("risk", "scan", "--in", str(f))[1] == "0\tiban-label\tinternal\n9\tssn-label\tconfidential\n"


def test_config_set_requires_manager_and_flags_controls(cv):
    assert cv("login", "--name", "root", stdin="root-pw\n")[0] == 0
    code, out, _ = cv("config", "set", "max_attempts", "5")
    assert code == 0 and "reassess: account-management" in out
    assert "max_attempts=5" in cv("config", "show")[1]
    assert cv("config", "set", "typo_key", "1")[0] == 1
    assert cv("login", "--name", "alice", stdin="a-pw\n")[0] == 0
    assert cv("config", "set", "max_attempts", "4")[0] == 1
    cv("logout")


def test_login_failure_exit_code(cv):
    code, out, err = cv("login", "--name", "ghost", stdin="x\n")
    assert (code, out) == (1, "login failed\n")


def test_usage_error(cv):
    assert cv("seal", "--level", "ultra", "--in", "x", "--channel", "network")[0] == 2
    assert cv("nonsense")[0] == 2


def test_uninitialised_home(tmp_path):
    code, _, err = Run(tmp_path / "empty")("audit", "verify")
    assert code == 1 and "not an initialised" in err
