import json

import numpy as np
import pytest

from spmbench.config import ConfigError, ExperimentConfig, default_config_dict, parse_ids
from spmbench.params import NOMINAL_PARAMETERS
from spmbench.protocols import DEFAULT_PROFILES, CyclerLimits
from spmbench.pso import SearchSpace, SwarmConfig


def _write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def test_defaults():
    cfg = ExperimentConfig.load()
    assert cfg.ground_truth == NOMINAL_PARAMETERS
    assert cfg.limits == CyclerLimits()
    assert cfg.cases == tuple(range(1, 32)) and cfg.scenarios == tuple(range(1, 32))
    assert cfg.swarm == SwarmConfig()
    assert np.array_equal(cfg.search_space.lower, SearchSpace.around(NOMINAL_PARAMETERS).lower)
    assert {d: p.to_dict() for d, p in cfg.profiles.items()} == \
        {d: p.to_dict() for d, p in DEFAULT_PROFILES.items()}
    assert cfg.seed == 0 and cfg.workers == 1


def test_partial_sections_merge(tmp_path):
    cfg = ExperimentConfig.load(_write(tmp_path, {"limits": {"v_min": 2.7}, "swarm": {"n_iterations": 5}}))
    assert cfg.limits.v_min == 2.7 and cfg.limits.v_max == 4.2
    assert cfg.swarm.n_iterations == 5 and cfg.swarm.n_particles == 50


def test_overrides_win(tmp_path):
    path = _write(tmp_path, {"seed": 3, "cases": [1, 2]})
    cfg = ExperimentConfig.load(path, {"seed": 9, "workers": None, "cases": [29]})
    assert cfg.seed == 9 and cfg.cases == (29,) and cfg.workers == 1


@pytest.mark.parametrize("data", [
    {"bogus": 1},
    {"limits": {"vmax": 4.2}},
    {"limits": {"v_min": 4.3}},
    {"cases": [0]},
    {"scenarios": [32]},
    {"cases": ["x"]},
    {"seed": -1},
    {"workers": 0},
    {"swarm": {"rng_seed": 4}},
    {"swarm": {"n_particles": 1}},
    {"ocp": {"positive": "missing.csv"}},
    {"ocp": {"middle": None}},
    {"ground_truth": {"alpha_neg": 1.0}},
    {"search_space": {"scale": [0.5, 2.0], "lower": {}}},
    {"profiles": {"C/5": {"type": "cccv", "c_rate": 0.2}}},
])
def test_invalid_configs(tmp_path, data):
    with pytest.raises(ConfigError):
        ExperimentConfig.load(_write(tmp_path, data))


def test_missing_and_malformed_file(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(bad)
    with pytest.raises(ConfigError):
        ExperimentConfig.load(_write(tmp_path, [1, 2]))


def test_explicit_bounds(tmp_path):
    x = NOMINAL_PARAMETERS
    lower = {k: v * 0.5 for k, v in x.to_dict().items()}
    upper = {k: min(v * 2.0, 0.99) if k.startswith("soc0") else v * 2.0 for k, v in x.to_dict().items()}
    cfg = ExperimentConfig.load(_write(tmp_path, {"search_space": {"lower": lower, "upper": upper}}))
    assert cfg.search_space.lower[0] == pytest.approx(0.5 * x.alpha_neg)
    assert cfg.search_space.upper[6] == pytest.approx(0.99)


def test_scale_bounds(tmp_path):
    cfg = ExperimentConfig.load(_write(tmp_path, {"search_space": {"scale": [0.5, 1.5]}}))
    assert cfg.search_space.upper[8] == pytest.approx(1.5 * NOMINAL_PARAMETERS.r0)
    assert cfg.search_space.upper[6] == pytest.approx(0.999)


def test_relative_ocp_path(tmp_path):
    (tmp_path / "pos.csv").write_text("stoichiometry,potential_v\n0.0,4.3\n0.3,4.0\n0.6,3.8\n1.0,3.4\n")
    cfg = ExperimentConfig.load(_write(tmp_path, {"ocp": {"positive": "pos.csv"}}))
    pair = cfg.ocp_pair()
    assert pair.positive.domain == (0.0, 1.0)


def test_case_seed_streams():
    cfg = ExperimentConfig.load()
    seeds = {cfg.case_seed(c) for c in range(1, 32)}
    assert len(seeds) == 31
    assert cfg.swarm_for(29).rng_seed == cfg.case_seed(29)
    assert ExperimentConfig.load(None, {"seed": 1}).case_seed(29) != cfg.case_seed(29)


def test_to_dict_round_trip():
    cfg = ExperimentConfig.load(None, {"cases": [3, 1]})
    again = ExperimentConfig.from_dict(cfg.to_dict())
    assert again.cases == (1, 3)
    assert again.ground_truth == cfg.ground_truth
    assert set(default_config_dict()) <= set(cfg.to_dict())


def test_parse_ids():
    assert parse_ids("1,3,5-7") == [1, 3, 5, 6, 7]
    assert parse_ids("all") == list(range(1, 32))
    assert parse_ids(" 29 , ") == [29]
    with pytest.raises(ConfigError):
        parse_ids("1-x")
