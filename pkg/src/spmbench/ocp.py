"""Open-circuit potential curves.

Curves are piecewise-linear tables of (stoichiometry, potential). The package
ships one default curve per electrode (see ``data/README.md`` for how they
were generated); they are stand-ins, not measured data for the identified cell.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np

HEADER = ("stoichiometry", "potential_v")


class OcpError(ValueError):
    pass


class OcpDomainError(OcpError):
    pass


@dataclass(frozen=True, eq=False)
class OcpCurve:
    stoichiometry: np.ndarray
    potential: np.ndarray
    name: str = "ocp"

    def __post_init__(self):
        x = np.ascontiguousarray(self.stoichiometry, dtype=float)
        u = np.ascontiguousarray(self.potential, dtype=float)
        if x.ndim != 1 or x.shape != u.shape:
            raise OcpError(f"{self.name}: stoichiometry and potential must be 1-D and equal length")
        if x.size < 4:
            raise OcpError(f"{self.name}: need at least 4 points, got {x.size}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
            raise OcpError(f"{self.name}: non-finite values")
        if x[0] < 0.0 or x[-1] > 1.0:
            raise OcpError(f"{self.name}: stoichiometry outside [0, 1]")
        if np.any(np.diff(x) <= 0.0):
            raise OcpError(f"{self.name}: stoichiometry must be strictly increasing")
        if np.any(np.diff(u) >= 0.0):
            raise OcpError(f"{self.name}: potential must be strictly decreasing in stoichiometry")
        x.setflags(write=False)
        u.setflags(write=False)
        object.__setattr__(self, "stoichiometry", x)
        object.__setattr__(self, "potential", u)

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.stoichiometry.tolist(), self.potential.tolist()))

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.stoichiometry[0]), float(self.stoichiometry[-1])

    def __call__(self, stoichiometry):
        return evaluate(self, stoichiometry)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(HEADER)
            for x, u in self.points:
                writer.writerow([repr(x), repr(u)])


class OcpPair(NamedTuple):
    positive: OcpCurve
    negative: OcpCurve


def _parse_rows(rows, name):
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if not rows:
        raise OcpError(f"{name}: empty table")
    header = tuple(cell.strip() for cell in rows[0])
    if header != HEADER:
        raise OcpError(f"{name}: expected header {','.join(HEADER)}, got {','.join(header)}")
    x, u = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise OcpError(f"{name}: line {lineno} must have two columns")
        try:
            x.append(float(row[0]))
            u.append(float(row[1]))
        except ValueError as exc:
            raise OcpError(f"{name}: line {lineno}: {exc}") from None
    return OcpCurve(np.array(x), np.array(u), name=name)


def load_curve(source, name: str | None = None) -> OcpCurve:
    """Load a curve from a CSV path, CSV text, or an iterable of (x, u) pairs."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and "," not in source):
        path = Path(source)
        with open(path, newline="") as fh:
            return _parse_rows(list(csv.reader(fh)), name or path.stem)
    if isinstance(source, str):
        return _parse_rows(list(csv.reader(io.StringIO(source))), name or "inline")
    pairs = [tuple(p) for p in source]
    if any(len(p) != 2 for p in pairs):
        raise OcpError("inline table rows must be (stoichiometry, potential) pairs")
    arr = np.array(pairs, dtype=float).reshape(-1, 2)
    return OcpCurve(arr[:, 0], arr[:, 1], name=name or "inline")


def evaluate(curve: OcpCurve, stoichiometry):
    """Piecewise-linear interpolation; raises OcpDomainError outside the table."""
    x = np.asarray(stoichiometry, dtype=float)
    lo, hi = curve.domain
    if np.any(~(x >= lo) | ~(x <= hi)):
        bad = x[~(x >= lo) | ~(x <= hi)] if x.ndim else x
        raise OcpDomainError(f"{curve.name}: stoichiometry {np.ravel(bad)[0]!r} outside [{lo}, {hi}]")
    out = np.interp(x, curve.stoichiometry, curve.potential)
    return float(out) if out.ndim == 0 else out


def default_curve(electrode: str) -> OcpCurve:
    files = {"positive": "ocp_nmc_default.csv", "negative": "ocp_graphite_default.csv"}
    try:
        filename = files[electrode]
    except KeyError:
        raise ValueError(f"electrode must be 'positive' or 'negative', got {electrode!r}") from None
    ref = resources.files("spmbench.data").joinpath(filename)
    with ref.open("r", newline="") as fh:
        return _parse_rows(list(csv.reader(fh)), filename[:-4])


def default_pair() -> OcpPair:
    return OcpPair(positive=default_curve("positive"), negative=default_curve("negative"))
