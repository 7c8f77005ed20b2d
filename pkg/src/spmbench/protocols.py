"""Closed-loop cycler for the five base test profiles.

A protocol is run against the model one output sample at a time. Every sample
is first tried with the intended current; when the trial would leave the
voltage window the cycler either ends the phase (CC, pulses) or lets the
proportional CV controller pick the current for that sample.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .ocp import OcpPair, default_pair
from .params import NOMINAL_CAPACITY_AH, GroupedParameters, PhysicalConstants
from .series import Segment, TimeSeries
from .spm import SolverConfig, Simulator, _raise_for_status, geometry

log = logging.getLogger(__name__)

DESIGNATIONS = ("C/5", "C/2", "1C", "P", "DST")
CCCV_DESIGNATIONS = ("C/5", "C/2", "1C")

# (duration_s, signed C-rate), positive = discharge. One 360 s cycle modeled on the
# USABC DST layout with the rate set {2C, 1C, C/2, C/5}: peak discharge 2C, peak
# charge 1C, mean |I| about C/3.07.
DEFAULT_DST_STEPS = (
    (16.0, 0.0), (28.0, 0.2), (12.0, 0.5), (8.0, -0.2),
    (16.0, 0.0), (24.0, 0.2), (12.0, 0.5), (8.0, -0.2),
    (16.0, 0.0), (24.0, 0.2), (12.0, 0.5), (8.0, -0.2),
    (16.0, 0.0), (36.0, 0.2), (8.0, 2.0), (28.0, 1.0), (8.0, -0.5), (32.0, 0.5), (8.0, -1.0),
    (40.0, 0.0),
)
DST_TARGET_C_RATE = 1.0 / 3.0


class ProtocolError(RuntimeError):
    pass


class MaxDurationExceeded(ProtocolError):
    pass


@dataclass(frozen=True)
class CccvCycle:
    c_rate: float

    def __post_init__(self):
        if not self.c_rate > 0:
            raise ValueError("c_rate must be > 0")


@dataclass(frozen=True)
class PulseCycle:
    pulse_c_rate: float
    on_s: float
    off_s: float

    def __post_init__(self):
        if not self.pulse_c_rate > 0:
            raise ValueError("pulse_c_rate must be > 0")
        if not (self.on_s > 0 and self.off_s > 0):
            raise ValueError("on_s and off_s must be > 0")


@dataclass(frozen=True)
class Dst:
    steps: tuple[tuple[float, float], ...] = DEFAULT_DST_STEPS

    def __post_init__(self):
        steps = tuple((float(d), float(c)) for d, c in self.steps)
        if not steps:
            raise ValueError("DST step table is empty")
        if any(d <= 0 for d, _ in steps):
            raise ValueError("DST step durations must be > 0")
        object.__setattr__(self, "steps", steps)

    @property
    def cycle_c_rate(self) -> float:
        """Mean |C-rate| of one pass through the table."""
        total = sum(d for d, _ in self.steps)
        return sum(d * abs(c) for d, c in self.steps) / total


@dataclass(frozen=True)
class ProfileSpec:
    variant: CccvCycle | PulseCycle | Dst
    designation: str

    def to_dict(self) -> dict:
        v = self.variant
        if isinstance(v, CccvCycle):
            return {"type": "cccv", "c_rate": v.c_rate}
        if isinstance(v, PulseCycle):
            return {"type": "pulse", "pulse_c_rate": v.pulse_c_rate, "on_s": v.on_s, "off_s": v.off_s}
        return {"type": "dst", "steps": [list(s) for s in v.steps]}

    @classmethod
    def from_dict(cls, designation: str, data: dict) -> "ProfileSpec":
        kind = data.get("type")
        if kind == "cccv":
            variant = CccvCycle(float(data["c_rate"]))
        elif kind == "pulse":
            variant = PulseCycle(float(data["pulse_c_rate"]), float(data["on_s"]), float(data["off_s"]))
        elif kind == "dst":
            variant = Dst(tuple(tuple(s) for s in data.get("steps", DEFAULT_DST_STEPS)))
        else:
            raise ValueError(f"profile {designation!r}: unknown type {kind!r}")
        return cls(variant, designation)


DEFAULT_PROFILES = {
    "C/5": ProfileSpec(CccvCycle(0.2), "C/5"),
    "C/2": ProfileSpec(CccvCycle(0.5), "C/2"),
    "1C": ProfileSpec(CccvCycle(1.0), "1C"),
    # 9.5 min at C/3, 35 min rest
    "P": ProfileSpec(PulseCycle(1.0 / 3.0, 570.0, 2100.0), "P"),
    "DST": ProfileSpec(Dst(), "DST"),
}


@dataclass(frozen=True)
class CyclerLimits:
    v_max: float = 4.2
    v_min: float = 2.5
    cv_cutoff_a: float = 0.050
    nominal_capacity_ah: float = NOMINAL_CAPACITY_AH
    cv_gain: float = 10.0
    max_duration_s: float = 100 * 3600.0
    # proportional corrections per output sample during voltage-limited operation
    cv_iterations: int = 8
    cv_tolerance_v: float = 1e-4
    dst_soc_floor: float = 0.005

    def __post_init__(self):
        if not self.v_max > self.v_min:
            raise ValueError("v_max must exceed v_min")
        if not self.cv_cutoff_a > 0:
            raise ValueError("cv_cutoff_a must be > 0")
        if not self.nominal_capacity_ah > 0:
            raise ValueError("nominal_capacity_ah must be > 0")
        if not self.cv_gain > 0:
            raise ValueError("cv_gain must be > 0")
        if not self.max_duration_s > 0:
            raise ValueError("max_duration_s must be > 0")
        if self.cv_iterations < 1:
            raise ValueError("cv_iterations must be >= 1")

    @property
    def one_c_a(self) -> float:
        return self.nominal_capacity_ah


class _Cycler:
    def __init__(self, params, limits, config, ocp_pair, consts):
        self.sim = Simulator(consts, config, ocp_pair)
        self.p = params.as_array()
        self.limits = limits
        self.dt = config.dt_output_s
        n = config.n_radial_shells
        self.c_neg = np.full(n, params.soc0_neg)
        self.c_pos = np.full(n, params.soc0_pos)
        self.volume = geometry(n).volume
        self.t, self.i, self.v = [], [], []
        self.marks = []
        self._gain = limits.cv_gain
        v0 = self._voltage(self.c_neg, self.c_pos, 0.0, 0.0)
        self._append(0.0, 0.0, v0)

    @property
    def time(self):
        return self.t[-1]

    @property
    def last_voltage(self):
        return self.v[-1]

    def bulk_neg(self):
        return float(3.0 * np.dot(self.volume, self.c_neg))

    def _append(self, t, i, v):
        self.t.append(t)
        self.i.append(i)
        self.v.append(v)

    def _voltage(self, c_neg, c_pos, current, t):
        v, status, side = self.sim.voltage(c_neg, c_pos, current, self.p)
        if status:
            _raise_for_status(status, side, t)
        return v

    def trial(self, current):
        c_neg, c_pos = self.c_neg.copy(), self.c_pos.copy()
        t = self.time + self.dt
        status, side = self.sim.advance(c_neg, c_pos, current, self.dt, self.p)
        if status:
            _raise_for_status(status, side, t)
        return self._voltage(c_neg, c_pos, current, t), c_neg, c_pos

    def commit(self, current, trial):
        v, c_neg, c_pos = trial
        if self.time + self.dt > self.limits.max_duration_s:
            raise MaxDurationExceeded(f"protocol exceeded max_duration_s = {self.limits.max_duration_s:g} s")
        self.c_neg, self.c_pos = c_neg, c_pos
        self._append(self.time + self.dt, current, v)

    def mark(self, label):
        self.marks.append((label, len(self.t)))

    def limited_current(self, current, v_set, lo, hi):
        """Proportional voltage control: I <- clamp(I + K*(V - v_set)) on trial steps.

        K is capped at 1/R, R being the incremental resistance -dV/dI seen
        between consecutive trials; a fixed gain diverges once K*R > 2.
        """
        trial = self.trial(current)
        prev = None
        for _ in range(self.limits.cv_iterations):
            error = trial[0] - v_set
            if abs(error) <= self.limits.cv_tolerance_v:
                break
            if prev is not None and abs(current - prev[0]) > 1e-12:
                r = -(trial[0] - prev[1]) / (current - prev[0])
                if r > 0:
                    self._gain = min(self.limits.cv_gain, 1.0 / r)
            prev = (current, trial[0])
            step = min(self.limits.cv_gain, self._gain) * error
            current = min(max(current + step, lo), hi)
            if current == prev[0]:
                break
            trial = self.trial(current)
        return current, trial

    def constant_current(self, current):
        """Apply ``current`` until the next sample would cross the voltage window."""
        lim = self.limits
        while True:
            trial = self.trial(current)
            if (current > 0 and trial[0] < lim.v_min) or (current < 0 and trial[0] > lim.v_max):
                return
            self.commit(current, trial)

    def constant_voltage(self, v_set, start_current):
        """Hold ``v_set`` until |I| drops below the cutoff; |I| never exceeds the CC magnitude."""
        lo, hi = (0.0, start_current) if start_current > 0 else (start_current, 0.0)
        current = start_current
        while True:
            current, trial = self.limited_current(current, v_set, lo, hi)
            self.commit(current, trial)
            if abs(current) < self.limits.cv_cutoff_a:
                return

    def hold(self, current, n_samples, stop_charge=False):
        """Fixed current for n samples; returns False if cut short by a voltage limit.

        Discharge stops below v_min. Charge either stops above v_max
        (``stop_charge``) or is voltage-limited at v_max for that sample.
        """
        lim = self.limits
        for _ in range(n_samples):
            trial = self.trial(current)
            applied = current
            if current > 0 and trial[0] < lim.v_min:
                return False
            if current < 0 and trial[0] > lim.v_max:
                if stop_charge:
                    return False
                applied, trial = self.limited_current(current, lim.v_max, current, 0.0)
            self.commit(applied, trial)
        return True

    def series(self, designation, soc_start):
        seg = Segment(designation, 0, soc_start, self.bulk_neg())
        return TimeSeries(np.array(self.t), np.array(self.i), np.array(self.v), (seg,), tuple(self.marks))


def _n_samples(duration_s, dt):
    return max(1, int(round(duration_s / dt)))


def run_protocol(
    spec: ProfileSpec,
    params: GroupedParameters,
    limits: CyclerLimits | None = None,
    config: SolverConfig | None = None,
    ocp_pair: OcpPair | None = None,
    consts: PhysicalConstants | None = None,
) -> TimeSeries:
    """Simulate one base profile from the fully charged state given by ``params``."""
    limits = limits or CyclerLimits()
    config = config or SolverConfig()
    ocp_pair = ocp_pair or default_pair()
    cyc = _Cycler(params, limits, config, ocp_pair, consts)
    soc_start = cyc.bulk_neg()
    if cyc.last_voltage <= limits.v_min:
        log.warning("%s: rest voltage %.4f V is at or below v_min = %.4f V; nothing to run",
                    spec.designation, cyc.last_voltage, limits.v_min)
        return cyc.series(spec.designation, soc_start)

    variant = spec.variant
    one_c = limits.one_c_a
    if isinstance(variant, CccvCycle):
        current = variant.c_rate * one_c
        cyc.mark("cc_discharge")
        cyc.constant_current(current)
        cyc.mark("cv_discharge")
        cyc.constant_voltage(limits.v_min, current)
        cyc.mark("cc_charge")
        cyc.constant_current(-current)
        cyc.mark("cv_charge")
        cyc.constant_voltage(limits.v_max, -current)
    elif isinstance(variant, PulseCycle):
        current = variant.pulse_c_rate * one_c
        n_on, n_off = _n_samples(variant.on_s, cyc.dt), _n_samples(variant.off_s, cyc.dt)
        cyc.mark("pulse_discharge")
        while cyc.hold(current, n_on):
            cyc.hold(0.0, n_off)
        cyc.hold(0.0, n_off)
        cyc.mark("pulse_charge")
        while cyc.hold(-current, n_on, stop_charge=True):
            cyc.hold(0.0, n_off)
        cyc.mark("cv_charge")
        cyc.constant_voltage(limits.v_max, -current)
    elif isinstance(variant, Dst):
        rate = variant.cycle_c_rate
        if abs(rate - DST_TARGET_C_RATE) > 0.15 * DST_TARGET_C_RATE:
            log.warning("DST table mean rate C/%.2f is more than 15%% away from C/3", 1.0 / rate)
        cyc.mark("dst")
        running = True
        while running:
            for duration, c_rate in variant.steps:
                if not cyc.hold(c_rate * one_c, _n_samples(duration, cyc.dt)):
                    running = False
                    break
                if cyc.bulk_neg() <= limits.dst_soc_floor:
                    running = False
                    break
    else:
        raise TypeError(f"unknown profile variant {variant!r}")
    return cyc.series(spec.designation, soc_start)


def equivalent_c_rate(series: TimeSeries, capacity_ah: float = NOMINAL_CAPACITY_AH) -> float:
    """Mean |I| of the record divided by the 1C current."""
    if len(series) == 0:
        raise ValueError("empty series")
    return float(np.mean(np.abs(series.current_a)) / capacity_ah)


def concat_profiles(series_list, designations, soc_tolerance: float = 0.01) -> TimeSeries:
    """Chain base records in order; DST may only appear last.

    Each record keeps its own segment, so a replay restarts from the charged
    state at every joint.
    """
    series_list = list(series_list)
    designations = list(designations)
    if not series_list or len(series_list) != len(designations):
        raise ValueError("need one designation per series")
    if "DST" in designations[:-1]:
        raise ValueError("DST must be the final member of a composite profile")
    for k in range(len(series_list) - 1):
        end = series_list[k].segments[-1].soc_end
        start = series_list[k + 1].segments[0].soc_start
        if end is not None and start is not None and abs(end - start) > soc_tolerance:
            raise ValueError(
                f"SOC discontinuity between {designations[k]} (ends {end:.4f}) and "
                f"{designations[k + 1]} (starts {start:.4f})"
            )
    if len(series_list) == 1:
        return series_list[0]
    times, currents, volts, segments, marks = [], [], [], [], []
    offset, rows = 0.0, 0
    for s, name in zip(series_list, designations):
        if rows:
            gap = float(s.time_s[1] - s.time_s[0]) if len(s) > 1 else 1.0
            offset = times[-1][-1] + gap - s.time_s[0]
        times.append(s.time_s + offset)
        currents.append(s.current_a)
        volts.append(s.voltage_v)
        for seg in s.segments:
            label = seg.label if len(s.segments) > 1 else name
            segments.append(Segment(label, seg.start + rows, seg.soc_start, seg.soc_end))
        marks.extend((label, row + rows) for label, row in s.marks)
        rows += len(s)
    return TimeSeries(np.concatenate(times), np.concatenate(currents), np.concatenate(volts),
                      tuple(segments), tuple(marks))


def describe(series: TimeSeries, capacity_ah: float = NOMINAL_CAPACITY_AH) -> dict:
    rate = equivalent_c_rate(series, capacity_ah)
    return {
        "duration_h": series.duration_h,
        "equivalent_c_rate": rate,
        "equivalent_c_rate_label": f"C/{1.0 / rate:.1f}" if rate > 0 else "0",
        "max_discharge_a": float(max(series.current_a.max(), 0.0)),
        "max_charge_a": float(max(-series.current_a.min(), 0.0)),
        "v_min": float(np.nanmin(series.voltage_v)),
        "v_max": float(np.nanmax(series.voltage_v)),
        "rows": len(series),
    }

