"""Grouped-parameter single particle model: data synthesis, swarm estimation, evaluation."""

from .evaluation import (
    OPTIONS, CaseRecord, CostTable, CostWeights, RmseMatrix, cost_table, cross_validate,
    dataset_diff, level_reports, normalize_column, param_errors, rmse, rmse_composition_check,
    select_optimal,
)
from .ocp import OcpCurve, OcpPair, default_pair, evaluate, load_curve
from .params import NOMINAL_CAPACITY_AH, NOMINAL_PARAMETERS, GroupedParameters, PhysicalConstants
from .protocols import (
    CccvCycle, CyclerLimits, Dst, ProfileSpec, PulseCycle, concat_profiles, equivalent_c_rate,
    run_protocol,
)
from .pso import EstimationResult, SearchSpace, SwarmConfig, estimate, objective
from .scenarios import BaseSeriesCache, Scenario, build_dataset, enumerate_scenarios, scenario
from .series import TimeSeries
from .spm import (
    CellState, ElectrodeState, SimulationError, Simulator, SolverConfig, bulk_soc, init_state,
    overpotential, simulate, step, surface_stoichiometry, terminal_voltage,
)

__version__ = "0.1.0"

__all__ = [
    "BaseSeriesCache",
    "CaseRecord",
    "CccvCycle",
    "CellState",
    "CostTable",
    "CostWeights",
    "CyclerLimits",
    "Dst",
    "ElectrodeState",
    "EstimationResult",
    "GroupedParameters",
    "NOMINAL_CAPACITY_AH",
    "NOMINAL_PARAMETERS",
    "OPTIONS",
    "OcpCurve",
    "OcpPair",
    "PhysicalConstants",
    "ProfileSpec",
    "PulseCycle",
    "RmseMatrix",
    "Scenario",
    "SearchSpace",
    "SimulationError",
    "Simulator",
    "SolverConfig",
    "SwarmConfig",
    "TimeSeries",
    "build_dataset",
    "bulk_soc",
    "concat_profiles",
    "cost_table",
    "cross_validate",
    "dataset_diff",
    "default_pair",
    "enumerate_scenarios",
    "equivalent_c_rate",
    "estimate",
    "evaluate",
    "init_state",
    "level_reports",
    "load_curve",
    "normalize_column",
    "objective",
    "overpotential",
    "param_errors",
    "rmse",
    "rmse_composition_check",
    "run_protocol",
    "scenario",
    "select_optimal",
    "simulate",
    "step",
    "surface_stoichiometry",
    "terminal_voltage",
]
