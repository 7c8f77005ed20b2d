"""Metrics and analyses over estimated Cases and validation Scenarios.

Rows of an RMSE matrix are Cases (parameter sets estimated on one profile
combination) and columns are Scenarios (the combination used for validation).
Entries that could not be simulated are NaN and are left out of every min/max
scan; the reports list them separately.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .params import PARAM_NAMES, GroupedParameters
from .scenarios import SCENARIO_MEMBERS
from .series import TimeSeries
from .spm import OK, Simulator

CC_RATES = frozenset({"C/5", "C/2", "1C"})
DYNAMIC = frozenset({"P", "DST"})


class DegenerateNormalizationError(ValueError):
    pass


# -- RMSE -------------------------------------------------------------------

def rmse(measured, model) -> float:
    """Root-mean-square voltage error between two aligned records (or arrays)."""
    if isinstance(measured, TimeSeries) and isinstance(model, TimeSeries):
        if len(measured) != len(model):
            raise ValueError(f"length mismatch: {len(measured)} vs {len(model)}")
        if not np.array_equal(measured.time_s, model.time_s):
            raise ValueError("time stamps are not aligned")
        a, b = measured.voltage_v, model.voltage_v
    else:
        a = np.asarray(getattr(measured, "voltage_v", measured), float)
        b = np.asarray(getattr(model, "voltage_v", model), float)
        if a.shape != b.shape:
            raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("empty record")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def _rms(e) -> float:
    e = np.asarray(e, float)
    return float(np.sqrt(np.mean(e * e)))


@dataclass(frozen=True)
class CompositionVerdict:
    component_rmse: tuple[float, ...]
    composite_rmse: float
    bracketed: bool
    order_consistent: bool

    @property
    def ok(self) -> bool:
        return self.bracketed and self.order_consistent


def rmse_composition_check(components, rtol: float = 1e-12) -> CompositionVerdict:
    """Check how the RMSE of concatenated residual sets relates to the parts.

    The composite must lie within [min, max] of the component RMSEs, and for
    every ordered pair (A, B): RMSE(A) < RMSE(A + B) exactly when
    RMSE(A) < RMSE(B). Comparisons use a relative tolerance so that equal
    RMSEs computed along different summation paths count as equal.
    """
    parts = [np.asarray(c, float).ravel() for c in components]
    if len(parts) < 2 or any(p.size == 0 for p in parts):
        raise ValueError("need at least two non-empty residual sets")
    r = [_rms(p) for p in parts]
    comp = _rms(np.concatenate(parts))
    scale = max(max(r), comp)
    tol = rtol * scale
    bracketed = min(r) - tol <= comp <= max(r) + tol

    def less(x, y):
        return x < y - tol

    consistent = True
    for i, a in enumerate(parts):
        for j, b in enumerate(parts):
            if i == j:
                continue
            union = _rms(np.concatenate([a, b]))
            if less(r[i], union) != less(r[i], r[j]):
                consistent = False
    return CompositionVerdict(tuple(r), comp, bool(bracketed), consistent)


# -- cases and the validation matrix ---------------------------------------

@dataclass
class ParamErrorReport:
    delta_theta: np.ndarray
    mean_delta: float
    delta_dist: float

    def to_dict(self) -> dict:
        return {
            "delta_theta_pct": dict(zip(PARAM_NAMES, np.asarray(self.delta_theta).tolist())),
            "mean_delta_pct": self.mean_delta,
            "delta_dist": self.delta_dist,
        }


def _vector(theta) -> np.ndarray:
    if isinstance(theta, GroupedParameters):
        return theta.as_array()
    x = np.asarray(theta, float).ravel()
    if x.shape != (len(PARAM_NAMES),):
        raise ValueError(f"expected {len(PARAM_NAMES)} parameters, got {x.size}")
    return x


def param_errors(theta_star, theta_true) -> ParamErrorReport:
    """Per-component percentage errors and the Euclidean distance of the raw vectors.

    Either argument may be a GroupedParameters or a plain 9-vector.
    """
    est, true = _vector(theta_star), _vector(theta_true)
    if np.any(true == 0):
        raise ValueError("true parameter vector has a zero component")
    pct = np.abs(est - true) / np.abs(true) * 100.0
    return ParamErrorReport(pct, float(pct.mean()), float(np.linalg.norm(est - true)))


@dataclass
class CaseRecord:
    case_id: int
    theta_star: GroupedParameters
    t_opt_h: float
    t_exp_h: float
    training_rmse: float | None = None
    errors: ParamErrorReport | None = None

    def __post_init__(self):
        if self.case_id not in SCENARIO_MEMBERS:
            raise ValueError(f"case id must be in 1..31, got {self.case_id}")

    @property
    def t_total_h(self) -> float:
        return self.t_opt_h + self.t_exp_h

    def to_dict(self) -> dict:
        out = {
            "case_id": self.case_id,
            "members": list(SCENARIO_MEMBERS[self.case_id]),
            "theta_star": self.theta_star.to_dict(),
            "t_opt_h": self.t_opt_h,
            "t_exp_h": self.t_exp_h,
            "t_total_h": self.t_total_h,
            "training_rmse": self.training_rmse,
        }
        if self.errors is not None:
            out["param_errors"] = self.errors.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "CaseRecord":
        errors = None
        if "param_errors" in data:
            pe = data["param_errors"]
            errors = ParamErrorReport(
                np.array([pe["delta_theta_pct"][n] for n in PARAM_NAMES]),
                float(pe["mean_delta_pct"]), float(pe["delta_dist"]),
            )
        return cls(int(data["case_id"]), GroupedParameters.from_dict(data["theta_star"]),
                   float(data["t_opt_h"]), float(data["t_exp_h"]), data.get("training_rmse"), errors)


@dataclass
class RmseMatrix:
    """RMSE values [V] with rows = case ids and columns = scenario ids; NaN marks a failed entry."""

    case_ids: tuple[int, ...]
    scenario_ids: tuple[int, ...]
    values: np.ndarray
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.case_ids = tuple(int(c) for c in self.case_ids)
        self.scenario_ids = tuple(int(s) for s in self.scenario_ids)
        self.values = np.array(self.values, dtype=float)
        if self.values.shape != (len(self.case_ids), len(self.scenario_ids)):
            raise ValueError(f"values shape {self.values.shape} does not match ids")
        finite = self.values[np.isfinite(self.values)]
        if np.any(finite < 0):
            raise ValueError("RMSE entries must be >= 0")

    @property
    def flagged(self) -> list[tuple[int, int]]:
        rows, cols = np.nonzero(~np.isfinite(self.values))
        return [(self.case_ids[i], self.scenario_ids[j]) for i, j in zip(rows, cols)]

    def get(self, case_id: int, scenario_id: int) -> float:
        return float(self.values[self.case_ids.index(case_id), self.scenario_ids.index(scenario_id)])

    def column(self, scenario_id: int) -> np.ndarray:
        return self.values[:, self.scenario_ids.index(scenario_id)]

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["case"] + [str(s) for s in self.scenario_ids])
        for cid, row in zip(self.case_ids, self.values):
            w.writerow([cid] + ["nan" if not math.isfinite(v) else f"{v:.10g}" for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv_text(cls, text: str) -> "RmseMatrix":
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        if len(rows) < 2:
            raise ValueError("RMSE matrix CSV has no data rows")
        header = rows[0]
        if header[0] != "case":
            raise ValueError("first header cell must be 'case'")
        scen = [int(s) for s in header[1:]]
        cases, vals = [], []
        for r in rows[1:]:
            if len(r) != len(header):
                raise ValueError(f"row for case {r[0]} has {len(r) - 1} entries, expected {len(scen)}")
            cases.append(int(r[0]))
            vals.append([float(v) for v in r[1:]])
        return cls(tuple(cases), tuple(scen), np.array(vals))


def cross_validate(cases, datasets, simulator: Simulator | None = None) -> RmseMatrix:
    """RMSE of each case's parameters replayed on each scenario record.

    ``cases`` is a list of CaseRecord (or (case_id, GroupedParameters)) and
    ``datasets`` maps scenario id to its ground-truth TimeSeries. An
    infeasible replay yields NaN and a note instead of an exception.
    """
    simulator = simulator or Simulator()
    pairs = [(c.case_id, c.theta_star) if isinstance(c, CaseRecord) else (int(c[0]), c[1]) for c in cases]
    scenario_ids = tuple(sorted(datasets))
    values = np.full((len(pairs), len(scenario_ids)), np.nan)
    notes = {}
    for i, (cid, theta) in enumerate(pairs):
        for j, sid in enumerate(scenario_ids):
            ds = datasets[sid]
            volts, status, side, row = simulator.replay(ds.time_s, ds.current_a, ds.segment_starts, theta)
            if status == OK:
                values[i, j] = rmse(ds.voltage_v, volts)
            else:
                notes[f"{cid},{sid}"] = {"status": int(status), "electrode": int(side),
                                         "time_s": float(ds.time_s[row])}
    return RmseMatrix(tuple(c for c, _ in pairs), scenario_ids, values, notes)


# -- cost function -----------------------------------------------------------

def normalize_column(values) -> np.ndarray:
    """Min-max scaling onto [0, 1]."""
    x = np.asarray(values, float)
    if x.size < 2:
        raise DegenerateNormalizationError("need at least two values to normalize")
    lo, hi = x.min(), x.max()
    if not hi > lo:
        raise DegenerateNormalizationError(f"constant column (all values {lo!r})")
    return (x - lo) / (hi - lo)


@dataclass(frozen=True)
class CostWeights:
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        w = (self.alpha, self.beta, self.gamma)
        if any(not 0.0 <= x <= 1.0 for x in w):
            raise ValueError("weights must lie in [0, 1]")
        if abs(sum(w) - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {sum(w)!r}")


OPTIONS = {
    "O1": CostWeights(1.0, 0.0, 0.0),
    "O2": CostWeights(0.0, 1.0, 0.0),
    "O3": CostWeights(0.0, 0.0, 1.0),
    "O4": CostWeights(0.5, 0.5, 0.0),
    "O5": CostWeights(0.5, 0.0, 0.5),
    "O6": CostWeights(0.0, 0.5, 0.5),
    "O7": CostWeights(1 / 3, 1 / 3, 1 / 3),
}
OPTION_LABELS = {
    "O1": "Output error",
    "O2": "Parameter error",
    "O3": "Time requirement",
    "O4": "Output and parameter error",
    "O5": "Output error-time",
    "O6": "Parameter error-time",
    "O7": "Balanced",
}
METRIC_COLUMNS = ("e_y", "e_theta", "t_total")


@dataclass
class CostTable:
    case_ids: tuple[int, ...]
    e_y: np.ndarray
    e_theta: np.ndarray
    t_total: np.ndarray
    j: dict[str, np.ndarray]

    def row(self, case_id: int) -> dict:
        k = self.case_ids.index(case_id)
        out = {"case": case_id, "e_y": float(self.e_y[k]), "e_theta": float(self.e_theta[k]),
               "t_total": float(self.t_total[k])}
        out.update({name: float(v[k]) for name, v in self.j.items()})
        return out

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["case", *METRIC_COLUMNS, *self.j])
        for k, cid in enumerate(self.case_ids):
            w.writerow([cid, f"{self.e_y[k]:.10g}", f"{self.e_theta[k]:.10g}", f"{self.t_total[k]:.10g}",
                        *(f"{v[k]:.10g}" for v in self.j.values())])
        return buf.getvalue()


def read_metrics_csv(text: str):
    """Parse ``case,e_y,e_theta,t_total`` rows; returns (case_ids, e_y, e_theta, t_total)."""
    reader = csv.DictReader(io.StringIO(text))
    need = ("case",) + METRIC_COLUMNS
    if reader.fieldnames is None or any(c not in reader.fieldnames for c in need):
        raise ValueError(f"metrics CSV needs columns {','.join(need)}")
    rows = list(reader)
    if not rows:
        raise ValueError("metrics CSV has no rows")
    cases = tuple(int(r["case"]) for r in rows)
    cols = [np.array([float(r[c]) for r in rows]) for c in METRIC_COLUMNS]
    return (cases, *cols)


def cost_table(case_ids, e_y, e_theta, t_total, options=None) -> CostTable:
    """J = alpha*norm(e_y) + beta*norm(e_theta) + gamma*norm(t_total) for every option."""
    options = options or OPTIONS
    e_y, e_theta, t_total = (np.asarray(v, float) for v in (e_y, e_theta, t_total))
    n = len(case_ids)
    if not (e_y.shape == e_theta.shape == t_total.shape == (n,)):
        raise ValueError("metric columns must have one entry per case")
    if len(set(case_ids)) != n:
        raise ValueError("duplicate case ids")
    ny, nt, nT = normalize_column(e_y), normalize_column(e_theta), normalize_column(t_total)
    j = {name: w.alpha * ny + w.beta * nt + w.gamma * nT for name, w in options.items()}
    return CostTable(tuple(int(c) for c in case_ids), e_y, e_theta, t_total, j)


@dataclass(frozen=True)
class Optimum:
    option: str
    case_id: int
    j: float
    tied_with: tuple[int, ...] = ()

    def to_dict(self, table: CostTable | None = None) -> dict:
        out = {"option": self.option, "label": OPTION_LABELS.get(self.option, self.option),
               "case": self.case_id, "members": list(SCENARIO_MEMBERS.get(self.case_id, ())),
               "min_j": self.j, "ties": list(self.tied_with)}
        if table is not None:
            row = table.row(self.case_id)
            out.update({c: row[c] for c in METRIC_COLUMNS})
        return out


def select_optimal(table: CostTable, option: str, tie_tol: float = 0.0) -> Optimum:
    """Case with the smallest J for ``option``; ties go to the lowest case id."""
    values = table.j[option]
    best = float(values.min())
    tied = sorted(c for c, v in zip(table.case_ids, values) if v <= best + tie_tol)
    return Optimum(option, tied[0], best, tuple(tied[1:]))


# -- level reports -----------------------------------------------------------

@dataclass(frozen=True)
class DatasetDiff:
    added: tuple[str, ...]
    excluded: tuple[str, ...]
    swapped: tuple[tuple[str, str], ...]

    @property
    def empty(self) -> bool:
        return not (self.added or self.excluded or self.swapped)

    def to_dict(self) -> dict:
        return {"added": list(self.added), "excluded": list(self.excluded),
                "swapped": [list(s) for s in self.swapped]}


def dataset_diff(ideal, found) -> DatasetDiff:
    """Members gained and lost going from ``ideal`` to ``found``.

    Within each category (CC rates, dynamic profiles) a single loss paired
    with a single gain is reported as a swap; all other changes are plain
    additions and exclusions.
    """
    order = {d: k for k, d in enumerate(("C/5", "C/2", "1C", "P", "DST"))}
    ideal, found = set(ideal), set(found)
    added, excluded, swapped = [], [], []
    for group in (CC_RATES, DYNAMIC):
        gone = sorted((ideal - found) & group, key=order.get)
        new = sorted((found - ideal) & group, key=order.get)
        if len(gone) == 1 and len(new) == 1:
            swapped.append((gone[0], new[0]))
        else:
            added.extend(new)
            excluded.extend(gone)
    return DatasetDiff(tuple(sorted(added, key=order.get)), tuple(sorted(excluded, key=order.get)),
                       tuple(swapped))


def _argsort_finite(col):
    idx = [i for i in np.argsort(col, kind="stable") if np.isfinite(col[i])]
    return idx


def level_reports(matrix: RmseMatrix, k: int = 5, cases=None, cost: CostTable | None = None) -> dict:
    """L0 to L7 summaries of a finished validation matrix.

    ``cases`` (CaseRecords) adds L6 and ``cost`` adds L7; without them those
    levels are reported as unavailable.
    """
    if not 1 <= k <= 5:
        raise ValueError("k must be in 1..5")
    v = matrix.values
    if v.size == 0 or not np.any(np.isfinite(v)):
        raise ValueError("matrix has no finite entries")
    cids, sids = matrix.case_ids, matrix.scenario_ids
    members = {i: SCENARIO_MEMBERS[i] for i in set(cids) | set(sids)}
    masked = np.where(np.isfinite(v), v, np.inf)

    report = {"flagged": [list(f) for f in matrix.flagged]}

    if 1 in sids:
        col = matrix.column(1)
        order = _argsort_finite(col)
        report["L0"] = {"scenario": 1, "best_case": cids[order[0]], "best_rmse": float(col[order[0]]),
                        "rmse_by_case": {str(c): (float(x) if np.isfinite(x) else None) for c, x in zip(cids, col)}}
    else:
        report["L0"] = None

    i, j = np.unravel_index(int(np.argmin(masked)), v.shape)
    report["L1"] = {"case": cids[i], "scenario": sids[j], "rmse": float(v[i, j])}

    diag = [(cids.index(s), jj) for jj, s in enumerate(sids) if s in cids]
    diag = [(ii, jj) for ii, jj in diag if np.isfinite(v[ii, jj])]
    if diag:
        ii, jj = min(diag, key=lambda p: (v[p], cids[p[0]]))
        report["L2"] = {"case": cids[ii], "scenario": sids[jj], "rmse": float(v[ii, jj])}
    else:
        report["L2"] = None

    l3, l4, l5 = [], [], []
    for jj, sid in enumerate(sids):
        col = v[:, jj]
        order = _argsort_finite(col)
        if not order:
            l3.append({"scenario": sid, "case": None})
            continue
        lo = order[0]
        diff = dataset_diff(members[sid], members[cids[lo]])
        l3.append({"scenario": sid, "case": cids[lo], "rmse": float(col[lo]), "on_diagonal": cids[lo] == sid,
                   "ideal": list(members[sid]), "found": list(members[cids[lo]]), **diff.to_dict()})
        ranked = []
        for rank, ii in enumerate(order[:k], start=1):
            rel = (col[ii] - col[lo]) / col[lo] * 100.0 if col[lo] > 0 else (0.0 if col[ii] == 0 else math.inf)
            ranked.append({"rank": rank, "case": cids[ii], "rmse": float(col[ii]), "above_min_pct": float(rel)})
        own_rank = next((r + 1 for r, ii in enumerate(order) if cids[ii] == sid), None)
        l4.append({"scenario": sid, "smallest": ranked, "own_case_rank": own_rank})
        hi = order[-1]
        l5.append({"scenario": sid, "case": cids[hi], "rmse": float(col[hi]), "members": list(members[cids[hi]])})
    report["L3"] = l3
    report["L4"] = l4
    report["L5"] = l5

    if cases:
        report["L6"] = [c.to_dict() for c in sorted(cases, key=lambda c: c.case_id)]
    else:
        report["L6"] = None
    if cost is not None:
        report["L7"] = [select_optimal(cost, name).to_dict(cost) for name in cost.j]
    else:
        report["L7"] = None
    report["swap_rule"] = ("one removed and one added member within the same category "
                           "(CC rates or dynamic profiles) is a swap; other changes are add/exclude")
    return report
