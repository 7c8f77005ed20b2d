"""Grouped-parameter single particle model.

Each electrode is one sphere in the normalized radius x = r/R_s with the
normalized concentration c(x, t) in [0, 1]:

    dc/dt = (1/alpha) * x**-2 * d/dx (x**2 dc/dx)
    dc/dx = 0 at x = 0
    dc/dx = g at x = 1,  g_pos = +I*alpha_pos/(3*Q_pos),  g_neg = -I*alpha_neg/(3*Q_neg)

with I > 0 on discharge, so the bulk stoichiometries move as d(soc_pos)/dt = I/Q_pos
and d(soc_neg)/dt = -I/Q_neg. The terminal voltage is

    V = U_pos(c_ss_pos) - U_neg(c_ss_neg) + eta_pos - eta_neg - R0*I
    eta = (2RT/F) * asinh(s*I / (6*Q*d*sqrt(c_ss*(1 - c_ss)))),  s_pos = -1, s_neg = +1

The full derivation from the ungrouped equations is in docs/grouped_form.md.
Space is discretized with conservative finite volumes on uniform shells and
time with explicit Euler, substepped under the diffusion stability limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .ocp import OcpPair, default_pair
from .params import GroupedParameters, PhysicalConstants

OK = 0
SURFACE_OUT_OF_BOUNDS = 1
KINETIC_SINGULARITY = 2
OCP_OUT_OF_DOMAIN = 3


class SimulationError(RuntimeError):
    """Base class for failures that make a simulated trajectory unusable."""

    def __init__(self, message, electrode=None, time_s=None):
        super().__init__(message)
        self.electrode = electrode
        self.time_s = time_s


class InfeasibleStateError(SimulationError):
    pass


class KineticSingularityError(SimulationError, ValueError):
    pass


class OcpDomainSimulationError(SimulationError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    n_radial_shells: int = 16
    dt_output_s: float = 1.0
    stability_safety: float = 0.5

    def __post_init__(self):
        if int(self.n_radial_shells) != self.n_radial_shells or self.n_radial_shells < 4:
            raise ValueError(f"n_radial_shells must be an integer >= 4, got {self.n_radial_shells!r}")
        if not self.dt_output_s > 0:
            raise ValueError(f"dt_output_s must be > 0, got {self.dt_output_s!r}")
        if not 0.0 < self.stability_safety < 1.0:
            raise ValueError(f"stability_safety must lie in (0, 1), got {self.stability_safety!r}")


@dataclass(frozen=True, eq=False)
class ElectrodeState:
    shells: np.ndarray

    def __post_init__(self):
        shells = np.array(self.shells, dtype=float)
        if shells.ndim != 1 or shells.size < 4:
            raise ValueError("an electrode needs a 1-D profile of at least 4 shells")
        if np.any(~(shells >= 0.0) | ~(shells <= 1.0)):
            raise InfeasibleStateError("shell concentration outside [0, 1]")
        shells.setflags(write=False)
        object.__setattr__(self, "shells", shells)


@dataclass(frozen=True, eq=False)
class CellState:
    negative: ElectrodeState
    positive: ElectrodeState
    time_s: float = 0.0

    def __post_init__(self):
        if not self.time_s >= 0.0:
            raise ValueError(f"time_s must be >= 0, got {self.time_s!r}")


class Geometry:
    """Shell faces, volumes and spacing for a uniform grid on [0, 1]."""

    def __init__(self, n_shells: int):
        self.n = int(n_shells)
        self.dx = 1.0 / self.n
        faces = np.linspace(0.0, 1.0, self.n + 1)
        self.centers = 0.5 * (faces[1:] + faces[:-1])
        self.area = faces**2
        # volume/(4 pi); the shells sum to 1/3
        self.volume = (faces[1:] ** 3 - faces[:-1] ** 3) / 3.0

    def max_substep(self, alpha: float, safety: float) -> float:
        return safety * alpha * self.dx**2 / 2.0


_GEOMETRY_CACHE: dict[int, Geometry] = {}


def geometry(n_shells: int) -> Geometry:
    geo = _GEOMETRY_CACHE.get(n_shells)
    if geo is None:
        geo = _GEOMETRY_CACHE[n_shells] = Geometry(n_shells)
    return geo


# --------------------------------------------------------------------------
# compiled kernels


@njit(cache=True)
def _diffuse(c, gradient, dt, alpha, area, volume, dx, dt_max):
    n = c.size
    n_sub = max(1, int(math.ceil(dt / dt_max)))
    h = dt / n_sub
    flux = np.empty(n + 1)
    flux[0] = 0.0
    for _ in range(n_sub):
        for k in range(1, n):
            flux[k] = area[k] * (c[k] - c[k - 1]) / dx
        flux[n] = area[n] * gradient
        for i in range(n):
            c[i] += h * (flux[i + 1] - flux[i]) / (alpha * volume[i])


@njit(cache=True)
def _surface(c):
    n = c.size
    return c[n - 1] + 0.5 * (c[n - 1] - c[n - 2])


@njit(cache=True)
def _check_bounds(c):
    for i in range(c.size):
        if not (0.0 <= c[i] <= 1.0):
            return False
    s = _surface(c)
    return 0.0 <= s <= 1.0


@njit(cache=True)
def _advance(c_neg, c_pos, current, dt, p, area, volume, dx, safety):
    """Advance both particles in place; returns a status code and the offending electrode."""
    alpha_neg, alpha_pos, q_neg, q_pos = p[0], p[1], p[2], p[3]
    _diffuse(c_neg, -current * alpha_neg / (3.0 * q_neg), dt, alpha_neg, area, volume, dx,
             safety * alpha_neg * dx * dx / 2.0)
    _diffuse(c_pos, current * alpha_pos / (3.0 * q_pos), dt, alpha_pos, area, volume, dx,
             safety * alpha_pos * dx * dx / 2.0)
    if not _check_bounds(c_neg):
        return 1, -1
    if not _check_bounds(c_pos):
        return 1, 1
    return 0, 0


@njit(cache=True)
def _eta(css, current, q, d, sign, rt2f):
    return rt2f * math.asinh(sign * current / (6.0 * q * d * math.sqrt(css * (1.0 - css))))


@njit(cache=True)
def _voltage(c_neg, c_pos, current, p, rt2f, xn, un, xp, up):
    """Terminal voltage; returns (volts, status, electrode)."""
    css_n = _surface(c_neg)
    css_p = _surface(c_pos)
    if not (0.0 < css_n < 1.0):
        return np.nan, 2, -1
    if not (0.0 < css_p < 1.0):
        return np.nan, 2, 1
    if css_n < xn[0] or css_n > xn[xn.size - 1]:
        return np.nan, 3, -1
    if css_p < xp[0] or css_p > xp[xp.size - 1]:
        return np.nan, 3, 1
    ocv = np.interp(css_p, xp, up) - np.interp(css_n, xn, un)
    eta_p = _eta(css_p, current, p[3], p[5], -1.0, rt2f)
    eta_n = _eta(css_n, current, p[2], p[4], 1.0, rt2f)
    return ocv + eta_p - eta_n - p[8] * current, 0, 0


@njit(cache=True)
def _replay(times, currents, seg_starts, p, n_shells, area, volume, dx, safety, rt2f, xn, un, xp, up):
    """Simulate a fixed current record; the state resets to (soc0_neg, soc0_pos) at each segment start.

    Row k applies currents[k] over (times[k-1], times[k]] and reports the voltage
    at times[k]; a segment's first row reports the initial state.
    Returns (voltages, status, electrode, failing_row).
    """
    n = times.size
    volts = np.empty(n)
    c_neg = np.empty(n_shells)
    c_pos = np.empty(n_shells)
    next_seg = 0
    for k in range(n):
        if next_seg < seg_starts.size and seg_starts[next_seg] == k:
            c_neg[:] = p[6]
            c_pos[:] = p[7]
            next_seg += 1
        else:
            status, side = _advance(c_neg, c_pos, currents[k], times[k] - times[k - 1], p, area,
                                    volume, dx, safety)
            if status != 0:
                volts[k:] = np.nan
                return volts, status, side, k
        v, status, side = _voltage(c_neg, c_pos, currents[k], p, rt2f, xn, un, xp, up)
        if status != 0:
            volts[k:] = np.nan
            return volts, status, side, k
        volts[k] = v
    return volts, 0, 0, -1


@njit(cache=True)
def _sse(measured, times, currents, seg_starts, p, n_shells, area, volume, dx, safety, rt2f,
         xn, un, xp, up):
    volts, status, _, _ = _replay(times, currents, seg_starts, p, n_shells, area, volume, dx,
                                  safety, rt2f, xn, un, xp, up)
    if status != 0:
        return np.inf
    total = 0.0
    for k in range(volts.size):
        e = measured[k] - volts[k]
        total += e * e
    return total


# --------------------------------------------------------------------------
# python API

_ELECTRODE_NAMES = {-1: "negative", 1: "positive"}


def _raise_for_status(status, side, time_s):
    electrode = _ELECTRODE_NAMES.get(int(side))
    if status == SURFACE_OUT_OF_BOUNDS:
        raise InfeasibleStateError(
            f"{electrode} electrode stoichiometry left [0, 1] at t = {time_s:.6g} s", electrode, time_s
        )
    if status == KINETIC_SINGULARITY:
        raise KineticSingularityError(
            f"{electrode} surface stoichiometry reached 0 or 1 at t = {time_s:.6g} s", electrode, time_s
        )
    if status == OCP_OUT_OF_DOMAIN:
        raise OcpDomainSimulationError(
            f"{electrode} surface stoichiometry outside the OCP table at t = {time_s:.6g} s",
            electrode,
            time_s,
        )


def _ocp_arrays(ocp_pair: OcpPair):
    return (
        ocp_pair.negative.stoichiometry,
        ocp_pair.negative.potential,
        ocp_pair.positive.stoichiometry,
        ocp_pair.positive.potential,
    )


def init_state(params: GroupedParameters, config: SolverConfig | None = None) -> CellState:
    if not isinstance(params, GroupedParameters):
        raise TypeError("params must be GroupedParameters")
    config = config or SolverConfig()
    n = config.n_radial_shells
    return CellState(
        ElectrodeState(np.full(n, params.soc0_neg)),
        ElectrodeState(np.full(n, params.soc0_pos)),
        0.0,
    )


def step(
    state: CellState,
    current_a: float,
    dt: float,
    params: GroupedParameters,
    consts: PhysicalConstants | None = None,
    config: SolverConfig | None = None,
) -> CellState:
    """One output step of length dt at constant current (internally substepped)."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    config = config or SolverConfig()
    geo = geometry(state.negative.shells.size)
    c_neg = state.negative.shells.copy()
    c_pos = state.positive.shells.copy()
    status, side = _advance(
        c_neg, c_pos, float(current_a), float(dt), params.as_array(), geo.area, geo.volume, geo.dx,
        config.stability_safety,
    )
    t = state.time_s + dt
    _raise_for_status(status, side, t)
    return CellState(ElectrodeState(c_neg), ElectrodeState(c_pos), t)


def surface_stoichiometry(electrode: ElectrodeState) -> float:
    return float(_surface(electrode.shells))


def bulk_soc(electrode: ElectrodeState) -> float:
    """Volume-weighted mean stoichiometry, 3 * int_0^1 c x^2 dx."""
    geo = geometry(electrode.shells.size)
    return float(3.0 * np.dot(geo.volume, electrode.shells))


def overpotential(
    c_ss: float,
    current_a: float,
    q: float,
    d: float,
    consts: PhysicalConstants | None = None,
    electrode_sign: int = 1,
) -> float:
    """Butler-Volmer overpotential in grouped form.

    ``electrode_sign`` is +1 for the negative electrode and -1 for the positive
    one (I > 0 is discharge).
    """
    if electrode_sign not in (1, -1):
        raise ValueError("electrode_sign must be +1 (negative) or -1 (positive)")
    if not 0.0 < c_ss < 1.0:
        raise KineticSingularityError(f"surface stoichiometry {c_ss!r} must lie strictly inside (0, 1)")
    consts = consts or PhysicalConstants()
    return float(_eta(float(c_ss), float(current_a), float(q), float(d), float(electrode_sign),
                      consts.thermal_voltage_2x))


def terminal_voltage(
    state: CellState,
    current_a: float,
    params: GroupedParameters,
    consts: PhysicalConstants | None = None,
    ocp_pair: OcpPair | None = None,
) -> float:
    consts = consts or PhysicalConstants()
    ocp_pair = ocp_pair or default_pair()
    v, status, side = _voltage(
        state.negative.shells, state.positive.shells, float(current_a), params.as_array(),
        consts.thermal_voltage_2x, *_ocp_arrays(ocp_pair),
    )
    _raise_for_status(status, side, state.time_s)
    return float(v)


class Simulator:
    """Binds parameter-independent context (constants, grid, OCP tables) for repeated runs."""

    def __init__(self, consts=None, config=None, ocp_pair=None):
        self.consts = consts or PhysicalConstants()
        self.config = config or SolverConfig()
        self.ocp_pair = ocp_pair or default_pair()
        self._geo = geometry(self.config.n_radial_shells)
        self._ocp = _ocp_arrays(self.ocp_pair)

    def _args(self, p):
        geo = self._geo
        return (p, geo.n, geo.area, geo.volume, geo.dx, self.config.stability_safety,
                self.consts.thermal_voltage_2x, *self._ocp)

    def replay(self, times, currents, segment_starts, params):
        """Raw voltages and a status tuple; never raises for infeasible parameters."""
        p = params.as_array() if isinstance(params, GroupedParameters) else np.asarray(params, float)
        return _replay(np.asarray(times, float), np.asarray(currents, float),
                       np.asarray(segment_starts, np.int64), *self._args(p))

    def sse(self, measured, times, currents, segment_starts, params_array) -> float:
        return float(_sse(measured, times, currents, segment_starts, *self._args(params_array)))

    # stepping helpers used by the cycler
    def advance(self, c_neg, c_pos, current, dt, p) -> tuple[int, int]:
        geo = self._geo
        return _advance(c_neg, c_pos, current, dt, p, geo.area, geo.volume, geo.dx,
                        self.config.stability_safety)

    def voltage(self, c_neg, c_pos, current, p):
        return _voltage(c_neg, c_pos, current, p, self.consts.thermal_voltage_2x, *self._ocp)


def simulate(
    profile,
    params: GroupedParameters,
    consts: PhysicalConstants | None = None,
    config: SolverConfig | None = None,
    ocp_pair: OcpPair | None = None,
    limits=None,
):
    """Simulate a current record (TimeSeries or current array) or run a ProfileSpec.

    A plain array of currents is applied one sample per ``dt_output_s``; a
    TimeSeries is replayed on its own time grid with a state reset at every
    segment start. Infeasible trajectories raise a SimulationError subclass
    carrying the electrode and time.
    """
    from .protocols import ProfileSpec, run_protocol
    from .series import Segment, TimeSeries

    config = config or SolverConfig()
    if isinstance(profile, ProfileSpec):
        return run_protocol(profile, params, limits, config, ocp_pair, consts=consts)
    if isinstance(profile, TimeSeries):
        times, currents, starts, segments = profile.time_s, profile.current_a, profile.segment_starts, profile.segments
    else:
        currents = np.asarray(profile, dtype=float).ravel()
        times = np.arange(currents.size) * config.dt_output_s
        starts = np.array([0])
        segments = (Segment("profile", 0),)
    if currents.size == 0:
        raise ValueError("profile is empty")
    sim = Simulator(consts, config, ocp_pair)
    volts, status, side, row = sim.replay(times, currents, starts, params)
    if status != OK:
        _raise_for_status(status, side, float(times[row]))
    return TimeSeries(times, currents, volts, segments)
