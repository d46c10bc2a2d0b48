import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from exchgmech.core import (
    Assignment,
    AuditReport,
    H,
    Instance,
    InstanceError,
    L,
    Outcome,
    PreferenceType,
    Violation,
    endpoint_utility_sum,
    parse_instance,
    render_instance,
    social_welfare,
    utility,
)
from exchgmech.figures import FIG1

from conftest import instances


@pytest.mark.parametrize(
    "y, loc, t, d, expected",
    [
        (8.0, 5.0, L, 8.0, 5.0),
        (0.0, 0.0, L, 8.0, 8.0),
        (0.0, 6.5, H, 8.0, 6.5),
    ],
)
def test_utility_examples(y, loc, t, d, expected):
    assert utility(y, loc, t, d) == expected


@pytest.mark.parametrize("y, loc", [(-0.1, 1.0), (8.5, 1.0), (1.0, -1.0), (1.0, 9.0)])
def test_utility_rejects_points_off_segment(y, loc):
    with pytest.raises(InstanceError):
        utility(y, loc, L, 8.0)


def test_preference_tokens():
    assert PreferenceType.parse("L") is L
    assert PreferenceType.parse("H") is H
    assert L.flipped() is H and H.flipped() is L
    for bad in ["l", "D", "LH", ""]:
        with pytest.raises(InstanceError):
            PreferenceType.parse(bad)


def test_social_welfare_examples():
    # locations by agent 5, 1, 8, 0, 7 -> location indices 2, 1, 4, 0, 3
    out = Outcome(8.0, Assignment((2, 1, 4, 0, 3)))
    # 5 + 7 + 8 + 8 + 7
    assert social_welfare(out, FIG1) == 35.0
    assert social_welfare(Outcome(0.0, Assignment((0,))), Instance(8, (0.0,), "L")) == 8.0
    assert social_welfare(Outcome(0.0, Assignment((0,))), Instance(8, (0.0,), "H")) == 0.0


def test_social_welfare_dimension_mismatch():
    with pytest.raises(InstanceError):
        social_welfare(Outcome(0.0, Assignment((0, 1))), FIG1)


@pytest.mark.parametrize("x, t", [(3.0, L), (0.0, H), (6.5, H)])
def test_endpoint_utility_sum_examples(x, t):
    assert endpoint_utility_sum(x, t, 8.0) == 8.0


@given(
    d=st.floats(0.01, 1e4),
    fy=st.floats(0, 1),
    fx=st.floats(0, 1),
    t=st.sampled_from([L, H]),
)
def test_utility_bounds_and_complementarity(d, fy, fx, t):
    y, loc = fy * d, fx * d
    u = utility(y, loc, t, d)
    assert 0.0 <= u <= d
    assert utility(y, loc, L, d) + utility(y, loc, H, d) == pytest.approx(d, rel=1e-12)


@given(d=st.floats(0.01, 1e4), fx=st.floats(0, 1), t=st.sampled_from([L, H]))
def test_endpoint_sum_is_segment_length(d, fx, t):
    assert endpoint_utility_sum(fx * d, t, d) == pytest.approx(d, rel=1e-12)


@given(instances(), st.data())
def test_same_type_relabeling_keeps_welfare(inst, data):
    perm = list(data.draw(st.permutations(range(inst.n))))
    y = data.draw(st.floats(0, inst.d))
    base = social_welfare(Outcome(y, Assignment(tuple(perm))), inst)
    for t in (L, H):
        idx = [i for i in range(inst.n) if inst.types[i] is t]
        shuffled = data.draw(st.permutations(idx))
        new = list(perm)
        for i, j in zip(idx, shuffled):
            new[i] = perm[j]
        assert social_welfare(Outcome(y, Assignment(tuple(new))), inst) == pytest.approx(base, abs=1e-9)


@given(instances(max_n=8))
def test_instance_json_round_trip(inst):
    again = parse_instance(render_instance(inst))
    assert again == inst
    assert again.positions == inst.positions


def test_instance_json_schema():
    inst = parse_instance('{"d": 8, "agents": [{"x": 0, "type": "L"}, {"x": 1.5, "type": "H"}]}')
    assert inst == Instance(8.0, (0.0, 1.5), "LH")
    bad = [
        "[]",
        '{"d": 8}',
        '{"d": 8, "agents": [], "extra": 1}',
        '{"d": 8, "agents": []}',
        '{"d": 8, "agents": [{"x": 0, "type": "L", "w": 1}]}',
        '{"d": 8, "agents": [{"x": 0, "type": "like"}]}',
        '{"d": 8, "agents": [{"x": 9, "type": "L"}]}',
        '{"d": 0, "agents": [{"x": 0, "type": "L"}]}',
        '{"d": "8", "agents": [{"x": 0, "type": "L"}]}',
        '{"d": 8, "agents": [{"x": true, "type": "L"}]}',
        "{not json",
    ]
    for text in bad:
        with pytest.raises(InstanceError):
            parse_instance(text)


def test_instance_allows_duplicate_positions():
    assert Instance(8, (2.0, 2.0, 2.0), "LHL").n == 3


def test_instance_validation():
    with pytest.raises(InstanceError):
        Instance(8, (1.0,), "LH")
    with pytest.raises(InstanceError):
        Instance(8, (), "")


def test_assignment_must_be_permutation():
    with pytest.raises(InstanceError):
        Assignment((0, 0, 1))
    assert Assignment.identity(3).perm == (0, 1, 2)


def test_outcome_facility_on_segment():
    with pytest.raises(InstanceError):
        Outcome(9.0, Assignment.identity(5)).check(FIG1)


def test_audit_report_invariant():
    assert AuditReport().truthful and AuditReport().max_gain == 0.0
    report = AuditReport((Violation(3, L, 6.5, 7.0),))
    assert not report.truthful
    assert report.max_gain == 0.5
    assert json.loads(json.dumps(report.to_dict()))["violations"][0]["gain"] == 0.5
