"""``cloudvault`` command line.

Exit status: 0 success, 1 operational refusal ("access denied", "wrong
secured", failed login, authorization errors), 2 usage error.
Passwords are read from the terminal, or one per line from standard input
when it is not a terminal; never from arguments.
"""

from __future__ import annotations

import argparse
import getpass
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .accounts import AccountKind, AccountType, Role
from .authn import Identity
from .classification import DataItem
from .clock import format_timestamp, parse_timestamp
from .config import Config
from .errors import AuthError, BadCredentials, CloudVaultError, NotFound, SessionInvalid
from .gateway import Message
from .levels import SensitivityLevel, dominates
from .risk import Channel, assess, dump_policy, parse_policy, scan_content
from .sealing import open_record, secure_data
from .store import LocalStore
from .vault import Vault, default_home

SESSION_FILE = "session"
EXIT_OK, EXIT_DENIED, EXIT_USAGE = 0, 1, 2


class _Passwords:
    def __init__(self, stdin=None):
        self.stdin = stdin or sys.stdin

    def __call__(self, prompt: str = "password: ") -> str:
        if self.stdin.isatty():
            return getpass.getpass(prompt)
        line = self.stdin.readline()
        if not line:
            raise CloudVaultError("no password on standard input")
        return line.rstrip("\r\n")


def _level(text: str) -> SensitivityLevel:
    try:
        return SensitivityLevel.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _channel(text: str) -> Channel:
    try:
        return Channel.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _role(text: str) -> Role:
    try:
        return Role.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _when(text: str) -> int:
    try:
        return parse_timestamp(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad timestamp {text!r}: {exc}") from None


def _enum_arg(enum):
    def convert(text: str):
        for member in enum:
            if member.value.lower() == text.lower():
                return member
        raise argparse.ArgumentTypeError(f"expected one of {', '.join(m.value.lower() for m in enum)}")
    return convert


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cloudvault", description="Data-custody gateway over a local store.")
    p.add_argument("--home", type=Path, help="store directory (default: $CLOUDVAULT_HOME or ~/.cloudvault)")
    p.add_argument("--version", action="version", version=f"cloudvault {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("init", help="create a store and its first account manager")
    s.add_argument("--name", required=True, help="login name of the first account manager")
    s.add_argument("--admin-id", default="admin")
    s.add_argument("--allow-test-profile", action="store_true")

    s = sub.add_parser("login", help="authenticate and keep a session for later commands")
    s.add_argument("--name", required=True)
    sub.add_parser("logout", help="end the saved session")

    acct = sub.add_parser("account", help="account lifecycle").add_subparsers(dest="action", required=True)
    s = acct.add_parser("request")
    s.add_argument("--type", dest="account_type", type=_enum_arg(AccountType), default=AccountType.INDIVIDUAL)
    s.add_argument("--kind", type=_enum_arg(AccountKind), default=AccountKind.PERMANENT)
    s.add_argument("--justification", required=True)
    s.add_argument("--lifetime", type=int, help="seconds; required for temporary/emergency accounts")
    s = acct.add_parser("approve")
    s.add_argument("request_id")
    s.add_argument("--account-id")
    s = acct.add_parser("reject")
    s.add_argument("request_id")
    s = acct.add_parser("assign-role")
    s.add_argument("target")
    s.add_argument("--role", type=_role, required=True)
    s.add_argument("--clearance", type=_level, required=True)
    for name in ("enable", "disable", "terminate"):
        acct.add_parser(name).add_argument("target")
    s = acct.add_parser("register", help="set login credentials for an account")
    s.add_argument("target")
    s.add_argument("--name", required=True)
    acct.add_parser("unlock").add_argument("name")
    s = acct.add_parser("expire")
    s.add_argument("--now", type=_when)
    s = acct.add_parser("sweep")
    s.add_argument("--now", type=_when)
    s.add_argument("--period", type=int, help="inactivity period in seconds (default from config)")
    acct.add_parser("list")
    acct.add_parser("requests")

    s = sub.add_parser("seal", help="run the full data-security procedure on a file")
    s.add_argument("--in", dest="infile", type=Path, required=True)
    s.add_argument("--level", type=_level, help="caller label; content scanning may raise it")
    s.add_argument("--channel", type=_channel, required=True)
    s.add_argument("--media-encrypted", action="store_true")
    s.add_argument("--name", help="log in as NAME instead of using the saved session")

    s = sub.add_parser("verify", help="check a sealed record's authentication code")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("file", nargs="?", type=Path)
    g.add_argument("--id", dest="record_id")

    s = sub.add_parser("open", help="verify and decrypt a stored record")
    s.add_argument("--id", dest="record_id", required=True)
    s.add_argument("--out", type=Path, required=True)

    s = sub.add_parser("put", help="store an existing .cvs file after verifying it")
    s.add_argument("file", type=Path)
    s = sub.add_parser("get", help="copy a stored record out")
    s.add_argument("record_id")
    s.add_argument("--out", type=Path, required=True)

    risk = sub.add_parser("risk").add_subparsers(dest="action", required=True)
    s = risk.add_parser("check")
    s.add_argument("--level", type=_level, required=True)
    s.add_argument("--channel", type=_channel, required=True)
    s.add_argument("--media-encrypted", action="store_true")
    s = risk.add_parser("scan")
    s.add_argument("--in", dest="infile", type=Path, required=True)

    pol = sub.add_parser("policy").add_subparsers(dest="action", required=True)
    pol.add_parser("update").add_argument("file", type=Path)
    pol.add_parser("show")

    aud = sub.add_parser("audit").add_subparsers(dest="action", required=True)
    aud.add_parser("verify")
    aud.add_parser("tail").add_argument("-n", type=int, default=10)

    ctl = sub.add_parser("controls").add_subparsers(dest="action", required=True)
    ctl.add_parser("due").add_argument("--now", type=_when)
    s = ctl.add_parser("assess")
    s.add_argument("control_id")
    s.add_argument("--now", type=_when)
    s.add_argument("--note", default="")
    ctl.add_parser("list")

    cfg = sub.add_parser("config").add_subparsers(dest="action", required=True)
    cfg.add_parser("show")
    s = cfg.add_parser("set")
    s.add_argument("key")
    s.add_argument("value")
    return p


class _Context:
    def __init__(self, home: Path, passwords: _Passwords, out, err):
        self.home = home
        self.passwords = passwords
        self.out = out
        self.err = err
        self._vault: Vault | None = None

    @property
    def vault(self) -> Vault:
        if self._vault is None:
            self._vault = Vault.open(self.home)
        return self._vault

    def say(self, text: str) -> None:
        print(text, file=self.out)

    def token(self) -> str:
        raw = self.vault.store.read_file(SESSION_FILE)
        if not raw:
            raise SessionInvalid("not logged in; run `cloudvault login` first")
        return raw.decode("ascii").strip()

    def caller(self) -> Identity:
        try:
            return self.vault.identity(self.token())
        except AuthError as exc:
            raise SessionInvalid(f"session unusable ({exc}); log in again") from None

    def drop_session(self) -> None:
        raw = self.vault.store.read_file(SESSION_FILE)
        if raw:
            self.vault.authn.logout(raw.decode("ascii").strip())
        (self.home / SESSION_FILE).unlink(missing_ok=True)


def _cmd_init(ctx: _Context, args) -> int:
    passw = ctx.passwords("new password: ")
    Vault.initialize(LocalStore(ctx.home), args.name, passw, admin_id=args.admin_id,
                     config=Config(allow_test_profile=args.allow_test_profile))
    ctx.say(f"initialised store at {ctx.home}; account manager {args.admin_id} (login {args.name})")
    return EXIT_OK


def _cmd_login(ctx: _Context, args) -> int:
    try:
        token = ctx.vault.authn.logged_user(args.name, ctx.passwords())
    except BadCredentials as exc:
        ctx.say("login failed")
        if exc.attempts_left:
            print(f"{exc.attempts_left} attempt(s) left", file=ctx.err)
        return EXIT_DENIED
    except AuthError as exc:
        ctx.say("login failed")
        print(str(exc), file=ctx.err)
        return EXIT_DENIED
    ctx.vault.store.write_file(SESSION_FILE, token.token_id.encode("ascii"), private=True)
    ctx.say(f"logged in as {token.account_id}")
    return EXIT_OK


def _cmd_logout(ctx: _Context, args) -> int:
    ctx.drop_session()
    ctx.say("logged out")
    return EXIT_OK


def _cmd_account(ctx: _Context, args) -> int:
    v = ctx.vault
    acc = v.accounts
    if args.action == "list":
        for a in acc.list():
            roles = ",".join(sorted(r.value for r in a.roles)) or "-"
            expiry = format_timestamp(a.expires_at) if a.expires_at is not None else "-"
            ctx.say(f"{a.account_id}\t{a.account_type.value}\t{a.kind.value}\t{a.state.value}\t"
                    f"{a.clearance.label}\t{roles}\texpires={expiry}")
        return EXIT_OK
    if args.action == "requests":
        for r in acc.list_requests():
            ctx.say(f"{r.request_id}\t{r.status.value}\t{r.account_type.value}/{r.kind.value}\t"
                    f"by {r.requester}\t{r.justification}")
        return EXIT_OK
    if args.action in ("expire", "sweep"):
        now = args.now if args.now is not None else v.clock()
        if args.action == "expire":
            ids = acc.expire_temporaries(now)
        else:
            ids = acc.sweep_inactive(now, args.period or v.config.inactivity_period_s)
        for i in ids:
            ctx.say(i)
        return EXIT_OK

    me = ctx.caller().account_id
    if args.action == "request":
        r = acc.request_account(me, args.account_type, args.kind, args.justification, args.lifetime)
        ctx.say(f"{r.request_id} {r.status.value}")
    elif args.action == "approve":
        a = acc.approve_account(me, args.request_id, args.account_id)
        ctx.say(f"{a.account_id} {a.state.value}")
    elif args.action == "reject":
        r = acc.reject_account(me, args.request_id)
        ctx.say(f"{r.request_id} {r.status.value}")
    elif args.action == "assign-role":
        a = acc.assign_role(me, args.target, args.role, args.clearance)
        ctx.say(f"{a.account_id} roles={','.join(sorted(r.value for r in a.roles))} clearance={a.clearance.label}")
    elif args.action in ("enable", "disable", "terminate"):
        a = getattr(acc, f"{args.action}_account")(me, args.target)
        ctx.say(f"{a.account_id} {a.state.value}")
    elif args.action == "register":
        v.authn.register_credentials(me, args.target, args.name, ctx.passwords("new password: "))
        ctx.say(f"credentials set for {args.target}")
    elif args.action == "unlock":
        v.authn.unlock(me, args.name)
        ctx.say(f"{args.name} unlocked")
    return EXIT_OK


def _cmd_seal(ctx: _Context, args) -> int:
    v = ctx.vault
    payload = args.infile.read_bytes()
    if args.name:
        passw = ctx.passwords()

        def reprompt() -> tuple[str, str]:
            print("login failed, try again", file=ctx.err)
            return args.name, ctx.passwords()

        record = v.authn.get_record(args.name)
        owner = record.account_id if record else args.name
        item = DataItem(payload, owner, args.level)
        outcome = v.gateway.data_security(args.name, passw, item, args.channel,
                                          media_encrypted=args.media_encrypted, reprompt=reprompt)
    else:
        token = ctx.token()
        try:
            owner = v.identity(token).account_id
        except AuthError:
            ctx.say(str(Message.LOGIN_FAILED))
            ctx.drop_session()
            return EXIT_DENIED
        item = DataItem(payload, owner, args.level)
        outcome = v.gateway.secure_with_session(token, item, args.channel, media_encrypted=args.media_encrypted)
        ctx.drop_session()
    ctx.say(str(outcome.message))
    if outcome.record_ref:
        print(f"record {outcome.record_ref}", file=ctx.err)
    return EXIT_OK if outcome.secured else EXIT_DENIED


def _cmd_verify(ctx: _Context, args) -> int:
    v = ctx.vault
    try:
        data = args.file.read_bytes() if args.file else v.archive.get_record_bytes(args.record_id)
    except (OSError, NotFound) as exc:
        print(f"error: {exc}", file=ctx.err)
        return EXIT_DENIED
    ok = secure_data(data, v.keyring)
    ctx.say("secured" if ok else "wrong secured")
    return EXIT_OK if ok else EXIT_DENIED


def _cmd_open(ctx: _Context, args) -> int:
    v = ctx.vault
    who = ctx.caller()
    record = v.archive.get_record(args.record_id)
    if not who.roles or not dominates(who.clearance, record.level):
        ctx.say("access denied")
        return EXIT_DENIED
    opened = open_record(record, v.keyring)
    args.out.write_bytes(opened.payload)
    ctx.say(f"opened {args.record_id} ({opened.level.label}, {len(opened.payload)} bytes)")
    return EXIT_OK


def _cmd_put(ctx: _Context, args) -> int:
    rid = ctx.vault.archive.put_record(args.file.read_bytes(), ctx.caller().account_id)
    ctx.say(rid)
    return EXIT_OK


def _cmd_get(ctx: _Context, args) -> int:
    args.out.write_bytes(ctx.vault.archive.get_record_bytes(args.record_id))
    ctx.say(f"wrote {args.out}")
    return EXIT_OK


def _cmd_risk(ctx: _Context, args) -> int:
    policy = ctx.vault.risk.current()
    if args.action == "check":
        verdict = assess(policy, args.level, args.channel, args.media_encrypted)
        rule = f" rule={verdict.matched_rule}" if verdict.matched_rule else ""
        ctx.say(f"{verdict.decision} score={verdict.score}{rule}")
        return EXIT_OK
    for f in scan_content(policy, args.infile.read_bytes()):
        ctx.say(f"{f.offset}\t{f.pattern_id}\t{f.floor.label}")
    return EXIT_OK


def _cmd_policy(ctx: _Context, args) -> int:
    v = ctx.vault
    if args.action == "show":
        ctx.out.write(dump_policy(v.risk.current()))
        return EXIT_OK
    new = parse_policy(args.file.read_text(encoding="utf-8"))
    installed, report = v.update_policy(ctx.caller(), new)
    ctx.say(f"policy v{installed.version} installed; review due {format_timestamp(installed.review_due)}")
    if report.requires_reassessment:
        ctx.say(f"reassess: {', '.join(sorted(report.affected_controls))}")
    return EXIT_OK


def _cmd_audit(ctx: _Context, args) -> int:
    v = ctx.vault
    if args.action == "verify":
        report = v.audit.verify_chain()
        if report.ok:
            ctx.say(f"chain OK ({report.length} events)")
            return EXIT_OK
        ctx.say(f"chain BROKEN at event {report.first_bad}")
        return EXIT_DENIED
    for e in v.audit.tail(args.n):
        ctx.say(f"{e.seq}\t{format_timestamp(e.timestamp)}\t{e.category.value}\t{e.actor}\t{e.detail}")
    return EXIT_OK


def _cmd_controls(ctx: _Context, args) -> int:
    reg = ctx.vault.controls
    if args.action == "due":
        for cid in reg.due(args.now):
            ctx.say(cid)
    elif args.action == "list":
        for c in reg.load():
            last = format_timestamp(c.last_assessed_at) if c.last_assessed_at is not None else "never"
            ctx.say(f"{c.control_id}\t{'critical' if c.critical else 'normal'}\t{c.period_days}d\t{last}")
    else:
        try:
            reg.assess(args.control_id, ctx.caller().account_id, args.now, args.note)
        except KeyError as exc:
            print(f"error: {exc.args[0]}", file=ctx.err)
            return EXIT_DENIED
        ctx.say(f"{args.control_id} assessed")
    return EXIT_OK


def _cmd_config(ctx: _Context, args) -> int:
    v = ctx.vault
    if args.action == "show":
        ctx.out.write(v.config.to_text())
        return EXIT_OK
    _, report = v.update_setting(ctx.caller(), args.key, args.value)
    ctx.say(f"{args.key}={args.value}")
    if report.requires_reassessment:
        ctx.say(f"reassess: {', '.join(sorted(report.affected_controls))}")
    return EXIT_OK


COMMANDS = {
    "init": _cmd_init, "login": _cmd_login, "logout": _cmd_logout, "account": _cmd_account,
    "seal": _cmd_seal, "verify": _cmd_verify, "open": _cmd_open, "put": _cmd_put, "get": _cmd_get,
    "risk": _cmd_risk, "policy": _cmd_policy, "audit": _cmd_audit, "controls": _cmd_controls,
    "config": _cmd_config,
}


def cli_dispatch(argv: Sequence[str] | None = None, *, stdin=None, stdout=None, stderr=None) -> int:
    out = stdout or sys.stdout
    err = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    ctx = _Context(args.home or default_home(), _Passwords(stdin), out, err)
    try:
        return COMMANDS[args.command](ctx, args)
    except (CloudVaultError, OSError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_DENIED


def main(argv: Sequence[str] | None = None) -> None:
    sys.exit(cli_dispatch(argv))


if __name__ == "__main__":
    main()
