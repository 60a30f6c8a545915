import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cloudvault import AuditCategory, DataItem, Identity, Role, SensitivityLevel, dominates
from cloudvault.errors import NotAuthorized, UnknownOwner
from cloudvault.risk import default_policy, detector_floor, scan_content

L = SensitivityLevel


def test_dominates_examples():
    assert dominates(L.SENSITIVE, L.PUBLIC)
    assert not dominates(L.INTERNAL, L.CONFIDENTIAL)


@pytest.mark.parametrize("a,b", list(itertools.product(range(4), repeat=2)))
def test_dominates_truth_table(a, b):
    assert dominates(L(a), L(b)) == (a >= b)


def test_total_order():
    for a, b in itertools.product(L, repeat=2):
        assert dominates(a, b) or dominates(b, a)
        if dominates(a, b) and dominates(b, a):
            assert a == b


@pytest.mark.parametrize("text,level", [("public", L.PUBLIC), ("Sensitive", L.SENSITIVE), ("2", L.CONFIDENTIAL)])
def test_parse(text, level):
    assert L.parse(text) is level


def test_parse_rejects_garbage():
    with pytest.raises(ValueError):
        L.parse("secret")


def owner(env, name="olive"):
    env.user(name, roles=(Role.END_USER,))
    return Identity(name, frozenset({Role.END_USER}), L.CONFIDENTIAL)


def test_label_internal_clean_content(env):
    me = owner(env)
    assert env.vault.classifier.classify(me, DataItem(b"lunch menu", "olive", L.INTERNAL)).level is L.INTERNAL


def test_detector_raises_floor(env):
    me = owner(env)
    got = env.vault.classifier.classify(me, DataItem(b"memo CONFIDENTIAL", "olive", L.PUBLIC))
    assert got.level is L.CONFIDENTIAL
    assert env.vault.audit.events()[-1].category is AuditCategory.CLASSIFICATION


def test_no_label_clean_content(env):
    me = owner(env)
    assert env.vault.classifier.classify(me, DataItem(b"hi", "olive")).level is L.PUBLIC


def test_other_owner_needs_manager(env):
    owner(env)
    stranger = Identity("sam", frozenset({Role.END_USER}), L.SENSITIVE)
    with pytest.raises(NotAuthorized):
        env.vault.classifier.classify(stranger, DataItem(b"x", "olive"))
    mgr = Identity("cdm", frozenset({Role.CLASSIFIED_DATA_MANAGER}), L.SENSITIVE)
    assert env.vault.classifier.classify(mgr, DataItem(b"x", "olive")).classified_by == "cdm"


def test_unknown_owner(env):
    mgr = Identity("cdm", frozenset({Role.CLASSIFIED_DATA_MANAGER}), L.SENSITIVE)
    with pytest.raises(UnknownOwner):
        env.vault.classifier.classify(mgr, DataItem(b"x", "nobody"))


@pytest.mark.parametrize("start,new", [(L.CONFIDENTIAL, L.SENSITIVE), (L.INTERNAL, L.INTERNAL)])
def test_reclassify_emits_review(env, start, new):
    me = owner(env)
    mgr = Identity("cdm", frozenset({Role.CLASSIFIED_DATA_MANAGER}), L.SENSITIVE)
    first = env.vault.classifier.classify(me, DataItem(b"x", "olive", start))
    n = len(env.vault.audit)
    again = env.vault.classifier.reclassify(mgr, first, new)
    assert again.level is new and again is not first
    assert len(env.vault.audit) == n + 1
    assert env.vault.audit.events()[-1].category is AuditCategory.RISK_REVIEW_REQUESTED


def test_reclassify_requires_manager(env):
    me = owner(env)
    first = env.vault.classifier.classify(me, DataItem(b"x", "olive"))
    with pytest.raises(NotAuthorized):
        env.vault.classifier.reclassify(me, first, L.SENSITIVE)


MARKERS = [b"CONFIDENTIAL", b"TOP SECRET", b"SSN:", b"IBAN"]


@settings(max_examples=100, deadline=None)
@given(label=st.one_of(st.none(), st.sampled_from(list(L))),
       chunks=st.lists(st.one_of(st.binary(max_size=8), st.sampled_from(MARKERS)), max_size=6))
def test_never_below_detector_floor(label, chunks):
    from conftest import make_env

    env = make_env()
    me = owner(env)
    payload = b"".join(chunks)
    got = env.vault.classifier.classify(me, DataItem(payload, "olive", label))
    floor = detector_floor(scan_content(default_policy(), payload))
    assert got.level >= floor
    assert got.level == max(label or L.PUBLIC, floor)
