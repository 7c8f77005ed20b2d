"""Experiment configuration: one JSON file, layered over the packaged defaults.

Top-level keys (all optional in a user file; missing keys fall back to
``data/default_config.json``):

    ground_truth   the nine grouped parameters used to synthesize data
    constants      gas_constant, faraday, temperature
    ocp            {"positive": path | null, "negative": path | null}; null = built-in curve
    limits         CyclerLimits fields
    solver         SolverConfig fields
    profiles       designation -> profile definition ("cccv", "pulse" or "dst")
    swarm          SwarmConfig fields except rng_seed (derived from ``seed``)
    search_space   {"lower": {...}, "upper": {...}}, or {"scale": [low, high]} around ground_truth
    cases          list of case ids to estimate
    scenarios      list of scenario ids to validate against
    seed           campaign seed; case k uses a stream derived from (seed, k)
    workers        worker processes for fitness evaluation
    out            output directory

Relative OCP paths resolve against the config file's directory.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

import numpy as np

from .ocp import OcpPair, default_curve, load_curve
from .params import GroupedParameters, PhysicalConstants
from .protocols import DESIGNATIONS, CyclerLimits, ProfileSpec
from .pso import SearchSpace, SwarmConfig
from .scenarios import SCENARIO_IDS
from .spm import SolverConfig

KNOWN_KEYS = {"ground_truth", "constants", "ocp", "limits", "solver", "profiles", "swarm",
              "search_space", "cases", "scenarios", "seed", "workers", "out"}
# sections a user file replaces wholesale instead of merging field by field
REPLACED_SECTIONS = ("ground_truth", "profiles", "search_space")


class ConfigError(ValueError):
    pass


def default_config_dict() -> dict:
    return json.loads(resources.files("spmbench.data").joinpath("default_config.json").read_text())


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key not in REPLACED_SECTIONS:
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _dataclass_from(cls, data, section):
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{section}: unknown field(s) {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}: {exc}") from None


def _ids(values, section):
    try:
        ids = [int(v) for v in values]
    except (TypeError, ValueError):
        raise ConfigError(f"{section}: ids must be integers") from None
    bad = [i for i in ids if i not in SCENARIO_IDS]
    if bad:
        raise ConfigError(f"{section}: ids {bad} outside 1..31")
    return tuple(sorted(set(ids)))


def parse_ids(text: str) -> list[int]:
    """'1,3,5-7' -> [1, 3, 5, 6, 7]; 'all' -> 1..31."""
    text = text.strip()
    if text == "all":
        return list(SCENARIO_IDS)
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                a, b = (int(x) for x in part.split("-", 1))
                out.extend(range(a, b + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise ConfigError(f"cannot parse id list {text!r}") from None
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    ground_truth: GroupedParameters
    constants: PhysicalConstants
    ocp_paths: dict
    limits: CyclerLimits
    solver: SolverConfig
    profiles: dict
    swarm: SwarmConfig
    search_space: SearchSpace
    cases: tuple[int, ...]
    scenarios: tuple[int, ...]
    seed: int
    workers: int
    out: Path
    raw: dict

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        unknown = set(data) - KNOWN_KEYS
        if unknown:
            raise ConfigError(f"unknown top-level key(s) {sorted(unknown)}")
        d = _merge(default_config_dict(), data)
        base_dir = Path(base_dir or ".")
        try:
            truth = GroupedParameters.from_dict(d["ground_truth"])
        except ValueError as exc:
            raise ConfigError(f"ground_truth: {exc}") from None
        consts = _dataclass_from(PhysicalConstants, d["constants"], "constants")

        ocp_paths = {}
        for side in ("positive", "negative"):
            p = d["ocp"].get(side)
            if p is not None:
                path = Path(p) if Path(p).is_absolute() else base_dir / p
                if not path.exists():
                    raise ConfigError(f"ocp.{side}: file {path} does not exist")
                ocp_paths[side] = path
        extra = set(d["ocp"]) - {"positive", "negative"}
        if extra:
            raise ConfigError(f"ocp: unknown key(s) {sorted(extra)}")

        limits = _dataclass_from(CyclerLimits, d["limits"], "limits")
        solver = _dataclass_from(SolverConfig, d["solver"], "solver")

        missing = [x for x in DESIGNATIONS if x not in d["profiles"]]
        if missing:
            raise ConfigError(f"profiles: missing {missing}")
        try:
            profiles = {x: ProfileSpec.from_dict(x, d["profiles"][x]) for x in DESIGNATIONS}
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"profiles: {exc}") from None

        swarm_d = dict(d["swarm"])
        if "rng_seed" in swarm_d:
            raise ConfigError("swarm: set the top-level 'seed' instead of swarm.rng_seed")
        swarm = _dataclass_from(SwarmConfig, swarm_d, "swarm")

        ss = d["search_space"]
        try:
            if "scale" in ss:
                if set(ss) - {"scale", "soc_limits"}:
                    raise ConfigError("search_space: 'scale' cannot be combined with explicit bounds")
                low, high = ss["scale"]
                soc = tuple(ss.get("soc_limits", (0.001, 0.999)))
                space = SearchSpace.around(truth, float(low), float(high), soc)
            else:
                space = SearchSpace.from_dict(ss)
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"search_space: {exc}") from None

        seed = d["seed"]
        workers = d["workers"]
        if not isinstance(seed, int) or seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if not isinstance(workers, int) or workers < 1:
            raise ConfigError("workers must be a positive integer")
        return cls(truth, consts, ocp_paths, limits, solver, profiles, swarm, space,
                   _ids(d["cases"], "cases"), _ids(d["scenarios"], "scenarios"),
                   seed, workers, Path(d["out"]), d)

    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "ExperimentConfig":
        """Read ``path`` (or only the defaults) and apply flag ``overrides`` last."""
        data, base = {}, Path(".")
        if path is not None:
            path = Path(path)
            if not path.exists():
                raise ConfigError(f"config file {path} does not exist")
            try:
                data = json.loads(path.read_text())
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from None
            if not isinstance(data, dict):
                raise ConfigError(f"{path}: top level must be an object")
            base = path.parent
        data.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_dict(data, base)

    def ocp_pair(self) -> OcpPair:
        curves = {}
        for side in ("positive", "negative"):
            path = self.ocp_paths.get(side)
            try:
                curves[side] = load_curve(path, side) if path else default_curve(side)
            except ValueError as exc:
                raise ConfigError(f"ocp.{side}: {exc}") from None
        return OcpPair(**curves)

    def case_seed(self, case_id: int) -> int:
        return int(np.random.SeedSequence([self.seed, case_id]).generate_state(1)[0])

    def swarm_for(self, case_id: int) -> SwarmConfig:
        return SwarmConfig(**{**self.swarm.to_dict(), "rng_seed": self.case_seed(case_id)})

    def to_dict(self) -> dict:
        d = copy.deepcopy(self.raw)
        d["out"] = str(self.out)
        d["cases"] = list(self.cases)
        d["scenarios"] = list(self.scenarios)
        return d
