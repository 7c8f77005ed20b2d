"""Grouped SPM parameters and physical constants."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

PARAM_NAMES = (
    "alpha_neg",
    "alpha_pos",
    "q_neg",
    "q_pos",
    "d_neg",
    "d_pos",
    "soc0_neg",
    "soc0_pos",
    "r0",
)


class InvalidParameterError(ValueError):
    pass


@dataclass(frozen=True)
class GroupedParameters:
    """The nine identifiable parameters of the grouped single particle model.

    alpha_*  diffusion time constants R_s**2 / D_s [s]
    q_*      electrode capacities F*A*L*eps*c_max [C]
    d_*      grouped kinetic constants r_eff*sqrt(c_e) / (F*R_s)
    soc0_*   initial (fully charged) stoichiometries [-]
    r0       ohmic resistance [Ohm]
    """

    alpha_neg: float
    alpha_pos: float
    q_neg: float
    q_pos: float
    d_neg: float
    d_pos: float
    soc0_neg: float
    soc0_pos: float
    r0: float

    def __post_init__(self):
        for name in PARAM_NAMES:
            value = getattr(self, name)
            if not np.isfinite(value):
                raise InvalidParameterError(f"{name} must be finite, got {value!r}")
        for name in ("alpha_neg", "alpha_pos", "q_neg", "q_pos", "d_neg", "d_pos", "r0"):
            if getattr(self, name) <= 0.0:
                raise InvalidParameterError(f"{name} must be > 0, got {getattr(self, name)!r}")
        for name in ("soc0_neg", "soc0_pos"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise InvalidParameterError(f"{name} must lie in (0, 1), got {value!r}")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in PARAM_NAMES], dtype=float)

    @classmethod
    def from_array(cls, values) -> "GroupedParameters":
        values = np.asarray(values, dtype=float).ravel()
        if values.size != len(PARAM_NAMES):
            raise InvalidParameterError(f"expected {len(PARAM_NAMES)} values, got {values.size}")
        return cls(*(float(v) for v in values))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "GroupedParameters":
        missing = [name for name in PARAM_NAMES if name not in data]
        if missing:
            raise InvalidParameterError(f"missing parameter(s): {', '.join(missing)}")
        extra = set(data) - set(PARAM_NAMES)
        if extra:
            raise InvalidParameterError(f"unknown parameter(s): {', '.join(sorted(extra))}")
        return cls(**{name: float(data[name]) for name in PARAM_NAMES})

    def replace(self, **changes) -> "GroupedParameters":
        data = self.to_dict()
        data.update(changes)
        return GroupedParameters(**data)


@dataclass(frozen=True)
class PhysicalConstants:
    gas_constant: float = 8.314
    faraday: float = 96485.33
    temperature: float = 298.15

    def __post_init__(self):
        if not self.temperature > 0.0:
            raise InvalidParameterError(f"temperature must be > 0 K, got {self.temperature!r}")

    @property
    def thermal_voltage_2x(self) -> float:
        """2RT/F, the prefactor of the asinh overpotential."""
        return 2.0 * self.gas_constant * self.temperature / self.faraday


# Identified 2.9 Ah NMC/graphite 18650 cell used as the synthetic ground truth.
NOMINAL_PARAMETERS = GroupedParameters(
    alpha_neg=3105.3457,
    alpha_pos=1865.8674,
    q_neg=10765.6853,
    q_pos=11117.7742,
    d_neg=3.3407e-5,
    d_pos=7.3545e-4,
    soc0_neg=0.9472,
    soc0_pos=0.0188,
    r0=0.0218,
)

NOMINAL_CAPACITY_AH = 2.9

__all__ = [
    "GroupedParameters",
    "InvalidParameterError",
    "NOMINAL_CAPACITY_AH",
    "NOMINAL_PARAMETERS",
    "PARAM_NAMES",
    "PhysicalConstants",
]
