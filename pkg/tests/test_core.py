import itertools
import json

import pytest
from hypothesis import given, strategies as st

from pktsched.core import (
    PHI,
    Instance,
    InvalidInstance,
    InvalidSchedule,
    Packet,
    Schedule,
    canonical_less,
    dumps_instance,
    heavier,
    instance_from_dict,
    loads_instance,
    make_instance,
    perturb,
    schedule_from_dict,
    schedule_to_dict,
    schedule_weight,
    validate_schedule,
)

from conftest import small_instances


def P(i, r, d, w):
    return Packet(i, r, d, w)


def test_canonical_less_examples():
    assert canonical_less(P(0, 0, 1, 5.0), P(1, 0, 2, 9.0))
    x = P(0, 0, 3, 2.0)
    assert not canonical_less(x, x)
    assert canonical_less(P(0, 0, 3, 7.0), P(1, 0, 3, 2.0))
    assert not canonical_less(P(1, 0, 3, 2.0), P(0, 0, 3, 7.0))


def test_canonical_less_id_tiebreak():
    assert canonical_less(P(0, 0, 3, 2.0), P(1, 0, 3, 2.0))
    assert not canonical_less(P(1, 0, 3, 2.0), P(0, 0, 3, 2.0))


def test_heavier_examples():
    assert heavier(P(0, 0, 0, 3.0), P(1, 0, 0, 2.0))
    assert heavier(P(0, 0, 0, 2.0), P(1, 0, 0, 2.0))
    assert not heavier(P(0, 0, 0, 1.0), P(1, 0, 0, 2.0))


packet_sets = st.lists(
    st.tuples(st.integers(0, 3), st.integers(0, 3), st.sampled_from([0.5, 1.0, 2.0, 3.0])),
    min_size=1, max_size=7,
).map(lambda xs: [P(i, 0, d, w) for i, (_, d, w) in enumerate(xs)])


@given(packet_sets)
def test_canonical_order_is_strict_total(ps):
    for x, y in itertools.product(ps, repeat=2):
        if x is y:
            assert not canonical_less(x, y)
        else:
            assert canonical_less(x, y) != canonical_less(y, x)
    for x, y, z in itertools.product(ps, repeat=3):
        if canonical_less(x, y) and canonical_less(y, z):
            assert canonical_less(x, z)


def test_packet_invariants():
    with pytest.raises(InvalidInstance):
        P(0, 3, 2, 1.0)
    with pytest.raises(InvalidInstance):
        P(0, 0, 0, -1.0)
    assert P(0, 2, 2, 0.0).is_tight()


def test_instance_invariants():
    with pytest.raises(InvalidInstance):
        Instance([P(0, 0, 0, 1.0), P(0, 1, 1, 2.0)])
    with pytest.raises(InvalidInstance):
        Instance([P(0, 0, 2, 1.0)], s_bound=2)
    with pytest.raises(InvalidInstance):
        Instance([P(0, 0, 0, 1.0), P(1, 1, 1, 1.0)], distinct_weights=True)
    inst = Instance([P(0, 0, 1, 1.0)], s_bound=2)
    assert inst.horizon == (0, 1)
    assert Instance([]).horizon is None


def test_validate_schedule_examples():
    inst = make_instance([(2, 3, 1.0), (4, 4, 2.0), (3, 4, 1.5)])
    assert validate_schedule(inst, Schedule({})) == []
    assert "before release" in validate_schedule(inst, Schedule({1: 0}))[0]
    conflict = validate_schedule(inst, Schedule({4: 1, 5: 1}))
    assert any("assigned to slots" in v for v in conflict)
    assert "unknown packet" in validate_schedule(inst, Schedule({3: 9}))[0]
    assert "after deadline" in validate_schedule(inst, Schedule({5: 2}))[0]


def test_schedule_weight(s3):
    assert schedule_weight(s3, Schedule({})) == 0
    full = Schedule({1: 0, 2: 1, 3: 2, 4: 3})
    assert schedule_weight(s3, full) == pytest.approx(0.9 + 0.9 + 1 + PHI, abs=1e-15)
    one = make_instance([(0, 0, 2.5)])
    assert schedule_weight(one, Schedule({0: 0})) == 2.5
    with pytest.raises(InvalidSchedule):
        schedule_weight(one, Schedule({1: 0}))


def test_perturb_makes_weights_distinct():
    inst = make_instance([(0, 1, 1.0), (0, 1, 1.0), (1, 2, 1.0)])
    assert not inst.distinct_weights
    out = perturb(inst)
    assert out.distinct_weights
    assert [p.weight for p in out.packets] == [1.0, 1.0 + 1e-9, 1.0 + 2e-9]


def test_instance_json_literals(s3):
    text = dumps_instance(s3)
    assert '"w": 0.9' in text
    assert loads_instance(text) == s3


@given(small_instances(distinct=False))
def test_instance_json_roundtrip(inst):
    back = loads_instance(dumps_instance(inst))
    assert back.packets == inst.packets
    assert back.s_bound == inst.s_bound


def test_schedule_json_roundtrip():
    sch = Schedule({1: 0, 2: 3})
    data = schedule_to_dict(sch)
    assert json.loads(json.dumps(data)) == {"slots": {"1": 0, "2": 3}}
    assert schedule_from_dict(data) == sch


def test_malformed_instance():
    with pytest.raises(InvalidInstance):
        instance_from_dict({"packets": [{"id": 0, "r": 0}]})


@given(small_instances())
def test_s_bound_windows(inst):
    assert all(p.span <= inst.s_bound for p in inst.packets)
