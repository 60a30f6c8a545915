import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import T0, FakeClock, fixture_log
from oracles import DAY, chain_first_bad, due_ids
from cloudvault import AuditCategory, AuditLog, MemoryStore, SecurityControl, assessments_due, impact_analysis
from cloudvault.monitoring import GENESIS_HASH, control_map_of, dump_controls, parse_controls, verify_chain_bytes


def test_first_event_is_genesis():
    log = AuditLog(MemoryStore(), FakeClock())
    ev = log.record_event(AuditCategory.LOGIN, "hello")
    assert ev.seq == 0
    assert ev.prev_hash == GENESIS_HASH


def test_second_links_to_first():
    log = AuditLog(MemoryStore(), FakeClock())
    a = log.record_event(AuditCategory.LOGIN, "a")
    b = log.record_event(AuditCategory.SEAL, "b", "admin")
    assert b.seq == 1
    assert b.prev_hash == a.hash
    assert log.events() == [a, b]
    assert len(log) == 2


def test_empty_log_verifies():
    report = AuditLog(MemoryStore()).verify_chain()
    assert report.ok and report.first_bad is None and report.length == 0


def test_random_events_verify_and_match_oracle():
    log = fixture_log(100, seed=3)
    data = log.store.read_audit()
    assert chain_first_bad(data) is None
    report = log.verify_chain()
    assert report.ok and report.length == 100


def test_mutation_reports_event_index():
    log = fixture_log(20, seed=4)
    data = log.store.read_audit()
    lines = data.split(b"\n")
    starts = [sum(len(x) + 1 for x in lines[:i]) for i in range(20)]
    rng = random.Random(9)
    for _ in range(300):
        pos = rng.randrange(len(data))
        mutated = bytearray(data)
        mutated[pos] = (mutated[pos] + rng.randrange(1, 256)) % 256
        expected = chain_first_bad(bytes(mutated))
        report = verify_chain_bytes(bytes(mutated))
        assert not report.ok
        assert report.first_bad == expected
        k = max(i for i, s in enumerate(starts) if s <= pos)
        # a line's terminating newline belongs to that line
        assert report.first_bad == k


def test_deleting_last_event_still_verifies():
    log = fixture_log(10, seed=5)
    data = log.store.read_audit()
    truncated = b"".join(line + b"\n" for line in data.split(b"\n")[:-2])
    report = verify_chain_bytes(truncated)
    assert report.ok and report.length == 9


def test_deleting_middle_event_is_detected():
    data = fixture_log(10, seed=6).store.read_audit()
    lines = data.split(b"\n")
    del lines[4]
    assert verify_chain_bytes(b"\n".join(lines)).first_bad == 4


def test_log_continues_after_reload():
    store = MemoryStore()
    AuditLog(store).record_event(AuditCategory.LOGIN, "x")
    ev = AuditLog(store).record_event(AuditCategory.LOGIN, "y")
    assert ev.seq == 1 and AuditLog(store).verify_chain().ok


# --- scheduling


def _ctl(cid, critical, period, last):
    return SecurityControl(cid, critical=critical, period_days=period, last_assessed_at=last)


def test_critical_366_days_is_due():
    now = T0
    assert assessments_due([_ctl("c", True, 365, now - 366 * DAY)], now) == ["c"]


def test_critical_exactly_365_days_not_due():
    now = T0
    assert assessments_due([_ctl("c", True, 365, now - 365 * DAY)], now) == []
    assert assessments_due([_ctl("c", True, 365, now - 365 * DAY - 1)], now) == ["c"]


def test_assessed_today_not_due():
    assert assessments_due([_ctl("c", True, 365, T0)], T0) == []


def test_never_assessed_is_due():
    assert assessments_due([_ctl("c", False, 365, None)], T0) == ["c"]


def test_non_critical_uses_accreditation_period():
    c = _ctl("n", False, 30, T0 - 400 * DAY)
    assert assessments_due([c], T0) == []
    assert assessments_due([c], T0, accreditation_period_days=365) == ["n"]


def test_critical_period_capped():
    with pytest.raises(ValueError):
        SecurityControl("c", critical=True, period_days=366)


def test_mixed_population_of_12_matches_oracle():
    rng = random.Random(12)
    controls = []
    for i in range(12):
        critical = rng.random() < 0.5
        period = rng.choice([30, 90, 365]) if critical else rng.choice([365, 1095])
        last = rng.choice([None, T0 - rng.randrange(0, 1500) * DAY, T0 - 365 * DAY, T0 - 366 * DAY])
        controls.append(_ctl(f"c{i}", critical, period, last))
    plain = [(c.control_id, c.critical, c.period_days, c.last_assessed_at) for c in controls]
    assert sorted(assessments_due(controls, T0)) == due_ids(plain, T0, 1095)


@settings(max_examples=200)
@given(st.lists(st.tuples(st.booleans(), st.integers(1, 365), st.one_of(st.none(), st.integers(0, 2000 * DAY))),
                max_size=15),
       st.integers(1, 2000))
def test_scheduler_property(population, accreditation):
    controls = [_ctl(f"c{i}", crit, period, None if off is None else T0 - off)
                for i, (crit, period, off) in enumerate(population)]
    plain = [(c.control_id, c.critical, c.period_days, c.last_assessed_at) for c in controls]
    assert sorted(assessments_due(controls, T0, accreditation)) == due_ids(plain, T0, accreditation)


# --- impact analysis


def test_impact_analysis():
    cmap = {"max_attempts": {"account-management"}, "risk_policy": {"risk-assessment"}}
    report = impact_analysis("chg-1", {"max_attempts"}, cmap)
    assert report.affected_controls == {"account-management"}
    assert report.requires_reassessment
    empty = impact_analysis("chg-2", {"unrelated"}, cmap)
    assert not empty.requires_reassessment and empty.affected_controls == frozenset()


def test_controls_round_trip():
    controls = [SecurityControl("a", "d", True, 90, T0, frozenset({"x", "y"})), SecurityControl("b")]
    again = parse_controls(dump_controls(controls))
    assert again == controls
    assert control_map_of(again) == {"x": {"a"}, "y": {"a"}}


def test_registry_assess_and_impact(env):
    v = env.vault
    assert set(v.controls.due()) == {c.control_id for c in v.controls.load()}
    before = len(v.audit)
    v.controls.assess("risk-assessment", "admin")
    assert len(v.audit) == before + 1
    assert "risk-assessment" not in v.controls.due()
    assert v.audit.events()[-1].category is AuditCategory.CONTROL_ASSESSMENT
    report = v.controls.apply_impact("policy v2", ["risk_policy"])
    assert report.affected_controls == {"risk-assessment"}
    assert "risk-assessment" in v.controls.due()
    env.clock.advance(10)
    v.controls.assess("record-sealing", "admin")
    env.clock.advance(366 * DAY)
    assert "record-sealing" in v.controls.due()
