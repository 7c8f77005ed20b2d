import logging

import numpy as np
import pytest

from spmbench.params import NOMINAL_PARAMETERS as P
from spmbench.protocols import (
    DEFAULT_DST_STEPS, DEFAULT_PROFILES, CccvCycle, CyclerLimits, Dst, MaxDurationExceeded,
    ProfileSpec, PulseCycle, concat_profiles, equivalent_c_rate, run_protocol,
)
from spmbench.series import Segment, TimeSeries
from spmbench.spm import Simulator

DESIGNATIONS = ("C/5", "C/2", "1C", "P", "DST")


def test_equivalent_c_rate_constant():
    s = TimeSeries(np.arange(10.0), np.full(10, 2.9), np.full(10, 3.7))
    assert equivalent_c_rate(s, 2.9) == pytest.approx(1.0)


def test_equivalent_c_rate_square_wave():
    # 9.5 min at C/3 then 35 min rest, sampled at 1 s
    i = np.r_[np.full(570, 2.9 / 3), np.zeros(2100)]
    s = TimeSeries(np.arange(i.size, dtype=float), i, np.full(i.size, 3.7))
    assert equivalent_c_rate(s, 2.9) == pytest.approx((1 / 3) * 570 / 2670)
    assert 1 / equivalent_c_rate(s, 2.9) == pytest.approx(14.05, abs=0.01)


def test_equivalent_c_rate_empty():
    with pytest.raises(ValueError):
        equivalent_c_rate(TimeSeries([], [], []), 2.9)


def test_default_dst_table_rate():
    d = Dst()
    assert d.steps == DEFAULT_DST_STEPS
    assert abs(d.cycle_c_rate - 1 / 3) < 0.15 / 3
    rates = [c for _, c in d.steps]
    assert max(rates) == 2.0 and min(rates) == -1.0
    assert sum(t for t, _ in d.steps) == 360


@pytest.mark.parametrize("bad", [
    lambda: CccvCycle(0.0),
    lambda: PulseCycle(-0.1, 60, 300),
    lambda: PulseCycle(0.3, 0, 300),
    lambda: Dst(()),
    lambda: Dst(((0.0, 1.0),)),
    lambda: CyclerLimits(v_max=2.0, v_min=2.5),
    lambda: CyclerLimits(cv_cutoff_a=0.0),
])
def test_invalid_specs(bad):
    with pytest.raises(ValueError):
        bad()


@pytest.mark.parametrize("name", DESIGNATIONS)
def test_profile_spec_round_trip(name):
    spec = DEFAULT_PROFILES[name]
    assert ProfileSpec.from_dict(name, spec.to_dict()) == spec


def test_profile_spec_unknown_type():
    with pytest.raises(ValueError, match="unknown type"):
        ProfileSpec.from_dict("X", {"type": "ramp"})


@pytest.mark.parametrize("name", DESIGNATIONS)
def test_voltage_window_held(base_cache, name):
    s = base_cache[name]
    lim = CyclerLimits()
    assert s.voltage_v.min() >= lim.v_min - 1e-3
    assert s.voltage_v.max() <= lim.v_max + 1e-3
    assert np.all(np.diff(s.time_s) == 1.0)


@pytest.mark.parametrize("name", ["C/5", "C/2", "1C", "P"])
def test_full_cycles_return_to_charged_state(base_cache, name):
    seg = base_cache[name].segments[0]
    assert seg.soc_start == pytest.approx(P.soc0_neg)
    assert abs(seg.soc_end - seg.soc_start) <= 0.01 * seg.soc_start


def test_dst_ends_discharged(base_cache):
    s = base_cache["DST"]
    seg = s.segments[0]
    assert seg.soc_end < 0.1
    assert s.current_a.max() == pytest.approx(2 * 2.9)
    assert s.current_a.min() >= -2.9 - 1e-12


@pytest.mark.parametrize("name,rate", [("C/5", 0.2), ("C/2", 0.5), ("1C", 1.0)])
def test_cv_phases(base_cache, name, rate):
    s = base_cache[name]
    marks = dict(s.marks)
    i = s.current_a
    cc = rate * 2.9
    cv_dis = i[marks["cv_discharge"]:marks["cc_charge"]]
    cv_chg = i[marks["cv_charge"]:]
    assert np.all(np.abs(cv_dis) <= cc) and np.all(cv_dis >= 0)
    assert np.all(np.abs(cv_chg) <= cc) and np.all(cv_chg <= 0)
    assert abs(cv_dis[-1]) < 0.05 and abs(cv_chg[-1]) < 0.05
    # constant-current phases really are constant
    assert np.all(i[marks["cc_discharge"]:marks["cv_discharge"]] == cc)
    assert np.all(i[marks["cc_charge"]:marks["cv_charge"]] == -cc)


def test_pulse_shape(base_cache):
    s = base_cache["P"]
    i = s.current_a
    pulse = 2.9 / 3.0
    levels = set(np.round(i[: dict(s.marks)["pulse_charge"]], 12))
    assert levels == {0.0, round(pulse, 12)}
    # first pulse lasts 570 samples and is followed by 2100 s of rest
    assert np.allclose(i[1:571], pulse, rtol=1e-15)
    assert np.all(i[571:2671] == 0.0)


def test_replay_reproduces_protocol_voltage(base_cache):
    s = base_cache["1C"]
    v, status, _, _ = Simulator().replay(s.time_s, s.current_a, s.segment_starts, P)
    assert status == 0
    assert np.array_equal(v, s.voltage_v)


def test_protocol_is_deterministic(base_cache):
    a = base_cache["DST"]
    b = run_protocol(DEFAULT_PROFILES["DST"], P)
    assert a.checksum() == b.checksum()


def test_rest_below_v_min_is_degenerate(caplog):
    with caplog.at_level(logging.WARNING):
        s = run_protocol(DEFAULT_PROFILES["1C"], P, CyclerLimits(v_min=4.25, v_max=4.3))
    assert len(s) == 1
    assert "nothing to run" in caplog.text


def test_max_duration():
    with pytest.raises(MaxDurationExceeded):
        run_protocol(DEFAULT_PROFILES["C/5"], P, CyclerLimits(max_duration_s=600.0))


# -- concatenation ----------------------------------------------------------

def test_concat_two_cccv(base_cache):
    a, b = base_cache["C/2"], base_cache["1C"]
    c = concat_profiles([a, b], ["C/2", "1C"])
    assert len(c) == len(a) + len(b)
    assert [seg.label for seg in c.segments] == ["C/2", "1C"]
    assert c.segments[1].start == len(a)
    assert np.all(np.diff(c.time_s) > 0)
    assert c.duration_h == pytest.approx(a.duration_h + b.duration_h, abs=1e-3)
    assert [row for label, row in c.marks if label == "cc_discharge"] == [1, len(a) + 1]


def test_concat_single_is_identity(base_cache):
    a = base_cache["P"]
    assert concat_profiles([a], ["P"]) is a


def test_concat_rejects_dst_not_last(base_cache):
    with pytest.raises(ValueError, match="DST"):
        concat_profiles([base_cache["DST"], base_cache["C/5"]], ["DST", "C/5"])


def test_concat_rejects_soc_jump():
    a = TimeSeries([0.0, 1.0], [0, 0], [4, 4], (Segment("x", 0, 0.95, 0.60),))
    b = TimeSeries([0.0, 1.0], [0, 0], [4, 4], (Segment("y", 0, 0.95, 0.95),))
    with pytest.raises(ValueError, match="discontinuity"):
        concat_profiles([a, b], ["C/5", "C/2"])


def test_concat_needs_matching_labels(base_cache):
    with pytest.raises(ValueError):
        concat_profiles([base_cache["C/5"]], ["C/5", "C/2"])
