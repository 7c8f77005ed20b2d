from itertools import combinations

import json
import pytest

from spmbench.protocols import DESIGNATIONS
from spmbench.scenarios import (
    SCENARIO_MEMBERS, REFERENCE_DURATIONS_H, Scenario, build_dataset, enumerate_scenarios, scenario,
    scenarios_json,
)


def test_count():
    assert len(enumerate_scenarios(REFERENCE_DURATIONS_H)) == 31


def test_numbering_follows_size_blocks_then_canonical_order():
    expected = [c for k in (5, 4, 3, 2, 1) for c in combinations(DESIGNATIONS, k)]
    assert [s.members for s in enumerate_scenarios(REFERENCE_DURATIONS_H)] == expected


def test_members_and_durations_match_reference(reference_scenarios):
    for s in enumerate_scenarios(REFERENCE_DURATIONS_H):
        members, hours = reference_scenarios[s.id]
        assert s.members == members
        assert s.duration_h == hours


@pytest.mark.parametrize("sid,hours", [(1, 50.3), (14, 11.1), (21, 7.1)])
def test_spot_durations(sid, hours):
    assert enumerate_scenarios(REFERENCE_DURATIONS_H)[sid - 1].duration_h == hours


def test_dst_always_last():
    for s in enumerate_scenarios(REFERENCE_DURATIONS_H):
        if "DST" in s.members:
            assert s.members[-1] == "DST"


def test_missing_duration():
    with pytest.raises(ValueError, match="missing"):
        enumerate_scenarios({"C/5": 1.0})


def test_noncanonical_order_rejected():
    with pytest.raises(ValueError):
        Scenario(99, ("DST", "C/5"), 1.0)
    with pytest.raises(ValueError):
        Scenario(99, (), 1.0)


def test_lookup():
    assert scenario(26) == ("P", "DST")
    with pytest.raises(ValueError):
        scenario(32)


def test_json_export():
    data = json.loads(scenarios_json(enumerate_scenarios(REFERENCE_DURATIONS_H)))
    assert data[20] == {"id": 21, "members": ["C/2", "1C"], "duration_h": 7.1}


def test_build_dataset_single(base_cache):
    assert build_dataset(SCENARIO_MEMBERS[29], cache=base_cache) is base_cache["1C"]


def test_build_dataset_composite(base_cache):
    s = build_dataset(SCENARIO_MEMBERS[26], cache=base_cache)
    assert [seg.label for seg in s.segments] == ["P", "DST"]
    assert len(s) == len(base_cache["P"]) + len(base_cache["DST"])


def test_build_dataset_duration_is_member_sum(base_cache):
    durations = base_cache.base_durations()
    sc = enumerate_scenarios(durations)[13]
    assert sc.members == ("C/2", "1C", "DST")
    assert sc.duration_h == pytest.approx(sum(durations[m] for m in sc.members), abs=1e-9)
    built = build_dataset(sc, cache=base_cache)
    # the chained record adds one sample gap per joint
    assert built.duration_h == pytest.approx(sc.duration_h, abs=3 / 3600)


def test_build_dataset_needs_source():
    with pytest.raises(ValueError):
        build_dataset(SCENARIO_MEMBERS[29])
