"""Global-best particle swarm estimation of the grouped parameters.

The swarm minimizes the squared voltage error between a measured record and
the model replayed on the same current record. Simulations that leave the
feasible stoichiometry range score a fixed penalty instead of being dropped,
so every particle always has a finite fitness.

All random numbers come from one ``numpy.random.Generator`` and are drawn in
particle order before any fitness is evaluated, which makes results
independent of the number of worker processes.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .params import PARAM_NAMES, GroupedParameters
from .series import TimeSeries
from .spm import Simulator

log = logging.getLogger(__name__)

SOC_NAMES = ("soc0_neg", "soc0_pos")


@dataclass(frozen=True, eq=False)
class SearchSpace:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float).ravel()
        hi = np.array(self.upper, dtype=float).ravel()
        if lo.shape != (len(PARAM_NAMES),) or hi.shape != lo.shape:
            raise ValueError(f"bounds must have {len(PARAM_NAMES)} entries")
        if not np.all(lo < hi):
            bad = [n for n, a, b in zip(PARAM_NAMES, lo, hi) if not a < b]
            raise ValueError(f"lower must be < upper for {bad}")
        # the whole box must hold valid parameter sets
        GroupedParameters.from_array(lo)
        GroupedParameters.from_array(hi)
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def around(cls, nominal: GroupedParameters, low: float = 0.2, high: float = 5.0,
               soc_limits: tuple[float, float] = (0.001, 0.999)) -> "SearchSpace":
        """Box [low*x, high*x] around each nominal value; SOC bounds clipped to ``soc_limits``."""
        x = nominal.as_array()
        lo, hi = low * x, high * x
        for name in SOC_NAMES:
            k = PARAM_NAMES.index(name)
            lo[k], hi[k] = max(lo[k], soc_limits[0]), min(hi[k], soc_limits[1])
        return cls(lo, hi)

    def contains(self, theta) -> bool:
        x = theta.as_array() if isinstance(theta, GroupedParameters) else np.asarray(theta, float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def to_dict(self) -> dict:
        return {
            "lower": dict(zip(PARAM_NAMES, self.lower.tolist())),
            "upper": dict(zip(PARAM_NAMES, self.upper.tolist())),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SearchSpace":
        return cls(GroupedParameters.from_dict(data["lower"]).as_array(),
                   GroupedParameters.from_dict(data["upper"]).as_array())


@dataclass(frozen=True)
class SwarmConfig:
    n_particles: int = 50
    n_iterations: int = 300
    inertia: float = 0.729
    cognitive: float = 1.49445
    social: float = 1.49445
    rng_seed: int = 0
    penalty_fitness: float = 1e12

    def __post_init__(self):
        if self.n_particles < 2:
            raise ValueError("n_particles must be >= 2")
        if self.n_iterations < 1:
            raise ValueError("n_iterations must be >= 1")
        if not 0.0 < self.inertia <= 1.0:
            raise ValueError("inertia must lie in (0, 1]")
        if not (self.cognitive > 0 and self.social > 0):
            raise ValueError("cognitive and social coefficients must be > 0")
        if not self.penalty_fitness > 0:
            raise ValueError("penalty_fitness must be > 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SwarmConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown swarm settings: {sorted(unknown)}")
        return cls(**data)


@dataclass
class EstimationResult:
    theta_star: GroupedParameters
    best_fitness: float
    history: list[float]
    t_opt_s: float
    n_evaluations: int = 0
    n_penalized: int = 0
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "theta_star": self.theta_star.to_dict(),
            "best_fitness": self.best_fitness,
            "history": list(self.history),
            "t_opt_s": self.t_opt_s,
            "n_evaluations": self.n_evaluations,
            "n_penalized": self.n_penalized,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EstimationResult":
        return cls(
            GroupedParameters.from_dict(data["theta_star"]),
            float(data["best_fitness"]),
            [float(h) for h in data["history"]],
            float(data["t_opt_s"]),
            int(data.get("n_evaluations", 0)),
            int(data.get("n_penalized", 0)),
            dict(data.get("meta", {})),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EstimationResult":
        return cls.from_dict(json.loads(text))


# -- fitness ----------------------------------------------------------------

class VoltageObjective:
    """Squared error of a replay against ``dataset``; penalty when infeasible.

    Plain data plus a Simulator, so it pickles cleanly into worker processes.
    """

    def __init__(self, dataset: TimeSeries, simulator: Simulator | None = None,
                 penalty: float = 1e12):
        if len(dataset) == 0:
            raise ValueError("dataset is empty")
        self.measured = np.ascontiguousarray(dataset.voltage_v)
        self.times = np.ascontiguousarray(dataset.time_s)
        self.currents = np.ascontiguousarray(dataset.current_a)
        self.starts = np.ascontiguousarray(dataset.segment_starts)
        self.simulator = simulator or Simulator()
        self.penalty = float(penalty)

    def __call__(self, theta) -> float:
        x = theta.as_array() if isinstance(theta, GroupedParameters) else np.asarray(theta, float)
        if not _valid(x):
            return self.penalty
        value = self.simulator.sse(self.measured, self.times, self.currents, self.starts, x)
        return value if np.isfinite(value) else self.penalty

    def batch(self, positions) -> np.ndarray:
        return np.array([self(x) for x in positions])

    def __getstate__(self):
        state = self.__dict__.copy()
        sim = state.pop("simulator")
        state["_sim_args"] = (sim.consts, sim.config, sim.ocp_pair)
        return state

    def __setstate__(self, state):
        args = state.pop("_sim_args")
        self.__dict__.update(state)
        self.simulator = Simulator(*args)


def _valid(x) -> bool:
    return bool(np.all(x[[0, 1, 2, 3, 4, 5, 8]] > 0) and 0 < x[6] < 1 and 0 < x[7] < 1)


def objective(theta, dataset: TimeSeries, simulator: Simulator | None = None,
              penalty: float = 1e12) -> float:
    """Sum over samples of (V_measured - V_model)**2, or ``penalty`` if infeasible."""
    return VoltageObjective(dataset, simulator, penalty)(theta)


_worker_fn = None


def _init_worker(fn):
    global _worker_fn
    _worker_fn = fn


def _eval_one(x):
    return _worker_fn(x)


# -- swarm ------------------------------------------------------------------

def minimize(fitness, lower, upper, config: SwarmConfig, batch=None, callback=None):
    """Bounded global-best PSO on an arbitrary scalar ``fitness``.

    ``batch`` (positions -> fitness array) overrides per-particle calls and is
    how parallel evaluation is plugged in. Returns (best_x, best_f, history,
    n_penalized).
    """
    lower = np.asarray(lower, float)
    upper = np.asarray(upper, float)
    n, dim = config.n_particles, lower.size
    rng = np.random.default_rng(config.rng_seed)
    evaluate = batch or (lambda xs: np.array([fitness(x) for x in xs]))

    x = rng.uniform(lower, upper, size=(n, dim))
    v = np.zeros((n, dim))
    pbest_x = x.copy()
    pbest_f = np.full(n, np.inf)
    gbest_x, gbest_f = x[0].copy(), np.inf
    history, n_penalized = [], 0

    for it in range(config.n_iterations):
        f = np.asarray(evaluate(x), dtype=float)
        n_penalized += int(np.sum(f >= config.penalty_fitness))
        better = f < pbest_f
        pbest_x[better], pbest_f[better] = x[better], f[better]
        k = int(np.argmin(pbest_f))
        if pbest_f[k] < gbest_f:
            gbest_x, gbest_f = pbest_x[k].copy(), float(pbest_f[k])
        history.append(gbest_f)
        if callback is not None:
            callback(it, gbest_f)
        if it == config.n_iterations - 1:
            break
        r1 = rng.random((n, dim))
        r2 = rng.random((n, dim))
        v = (config.inertia * v
             + config.cognitive * r1 * (pbest_x - x)
             + config.social * r2 * (gbest_x - x))
        x = x + v
        clipped = (x < lower) | (x > upper)
        x = np.clip(x, lower, upper)
        v[clipped] = 0.0
    return gbest_x, gbest_f, history, n_penalized


def estimate(dataset: TimeSeries, space: SearchSpace, config: SwarmConfig | None = None,
             simulator: Simulator | None = None, workers: int = 1, progress=None) -> EstimationResult:
    """Fit the grouped parameters to ``dataset`` inside ``space``."""
    config = config or SwarmConfig()
    if workers < 1:
        raise ValueError("workers must be >= 1")
    fn = VoltageObjective(dataset, simulator, config.penalty_fitness)
    t0 = time.perf_counter()
    if workers == 1:
        best_x, best_f, history, n_pen = minimize(fn, space.lower, space.upper, config, callback=progress)
    else:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(fn,)) as pool:
            chunk = max(1, config.n_particles // (4 * workers))

            def batch(xs):
                return np.fromiter(pool.map(_eval_one, list(xs), chunksize=chunk), float, len(xs))

            best_x, best_f, history, n_pen = minimize(fn, space.lower, space.upper, config,
                                                      batch=batch, callback=progress)
    elapsed = time.perf_counter() - t0
    if n_pen:
        log.info("%d of %d evaluations hit the infeasibility penalty",
                 n_pen, config.n_particles * config.n_iterations)
    return EstimationResult(
        GroupedParameters.from_array(best_x),
        float(best_f),
        [float(h) for h in history],
        elapsed,
        config.n_particles * len(history),
        n_pen,
    )


def training_rmse(result: EstimationResult, n_samples: int) -> float:
    return float(np.sqrt(result.best_fitness / n_samples))
