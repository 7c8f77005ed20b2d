"""The 31 profile combinations used both for estimation (Cases) and validation (Scenarios)."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .protocols import DEFAULT_PROFILES, DESIGNATIONS, concat_profiles, run_protocol

# Reference base durations, hours.
REFERENCE_DURATIONS_H = {"C/5": 10.1, "C/2": 4.4, "1C": 2.7, "P": 29.1, "DST": 4.0}

# Fixed numbering: blocks of 5, 4, 3, 2, 1 members.
SCENARIO_MEMBERS = {
    1: ("C/5", "C/2", "1C", "P", "DST"),
    2: ("C/5", "C/2", "1C", "P"),
    3: ("C/5", "C/2", "1C", "DST"),
    4: ("C/5", "C/2", "P", "DST"),
    5: ("C/5", "1C", "P", "DST"),
    6: ("C/2", "1C", "P", "DST"),
    7: ("C/5", "C/2", "1C"),
    8: ("C/5", "C/2", "P"),
    9: ("C/5", "C/2", "DST"),
    10: ("C/5", "1C", "P"),
    11: ("C/5", "1C", "DST"),
    12: ("C/5", "P", "DST"),
    13: ("C/2", "1C", "P"),
    14: ("C/2", "1C", "DST"),
    15: ("C/2", "P", "DST"),
    16: ("1C", "P", "DST"),
    17: ("C/5", "C/2"),
    18: ("C/5", "1C"),
    19: ("C/5", "P"),
    20: ("C/5", "DST"),
    21: ("C/2", "1C"),
    22: ("C/2", "P"),
    23: ("C/2", "DST"),
    24: ("1C", "P"),
    25: ("1C", "DST"),
    26: ("P", "DST"),
    27: ("C/5",),
    28: ("C/2",),
    29: ("1C",),
    30: ("P",),
    31: ("DST",),
}
SCENARIO_IDS = tuple(SCENARIO_MEMBERS)


@dataclass(frozen=True)
class Scenario:
    id: int
    members: tuple[str, ...]
    duration_h: float

    def __post_init__(self):
        if not self.members:
            raise ValueError("scenario needs at least one member")
        order = [DESIGNATIONS.index(m) for m in self.members]
        if order != sorted(set(order)):
            raise ValueError(f"scenario {self.id}: members {self.members} not in canonical order")

    @property
    def label(self) -> str:
        return ",".join(self.members)

    def to_dict(self) -> dict:
        return {"id": self.id, "members": list(self.members), "duration_h": self.duration_h}


def enumerate_scenarios(base_durations: dict[str, float]) -> list[Scenario]:
    """All 31 scenarios in their fixed numbering, durations summed from ``base_durations``."""
    missing = [d for d in DESIGNATIONS if d not in base_durations]
    if missing:
        raise ValueError(f"missing base durations for {missing}")
    out = []
    for sid, members in SCENARIO_MEMBERS.items():
        # round away float noise (4.4 + 2.7 = 7.1000000000000005)
        duration = round(sum(base_durations[m] for m in members), 10)
        out.append(Scenario(sid, members, duration))
    return out


def scenario(sid: int) -> tuple[str, ...]:
    try:
        return SCENARIO_MEMBERS[sid]
    except KeyError:
        raise ValueError(f"scenario id must be in 1..31, got {sid}") from None


def scenarios_json(scenarios) -> str:
    return json.dumps([s.to_dict() for s in scenarios], indent=1) + "\n"


class BaseSeriesCache:
    """Simulates each base profile at most once; later lookups reuse the stored series."""

    def __init__(self, params, limits=None, config=None, ocp_pair=None, profiles=None, consts=None):
        self.params = params
        self.limits = limits
        self.config = config
        self.ocp_pair = ocp_pair
        self.consts = consts
        self.profiles = dict(profiles or DEFAULT_PROFILES)
        self._series = {}

    def __getitem__(self, designation):
        if designation not in self._series:
            spec = self.profiles[designation]
            self._series[designation] = run_protocol(
                spec, self.params, self.limits, self.config, self.ocp_pair, self.consts
            )
        return self._series[designation]

    def base_durations(self) -> dict[str, float]:
        return {d: self[d].duration_h for d in DESIGNATIONS}


def build_dataset(sc, params=None, limits=None, config=None, ocp_pair=None, cache=None):
    """Run and chain the member protocols of a scenario (a Scenario or a member tuple)."""
    members = sc.members if isinstance(sc, Scenario) else tuple(sc)
    if cache is None:
        if params is None:
            raise ValueError("need params or a BaseSeriesCache")
        cache = BaseSeriesCache(params, limits, config, ocp_pair)
    return concat_profiles([cache[m] for m in members], members)
