"""Command-line front end for a full identification campaign.

    spmbench synth     simulate the 5 base profiles and the scenario datasets
    spmbench estimate  fit one parameter set per case
    spmbench validate  replay every case on every scenario -> rmse_matrix.csv
    spmbench analyze   cost table, optimal datasets and level reports
    spmbench report    plain-text summary tables

Exit codes: 0 ok, 2 bad configuration, 3 infeasible simulation, 4 missing
input files, 5 analysis impossible (degenerate or empty data).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, parse_ids
from .evaluation import (
    CaseRecord, CostTable, DegenerateNormalizationError, RmseMatrix, cost_table,
    cross_validate, level_reports, param_errors, read_metrics_csv, select_optimal,
)
from .protocols import DESIGNATIONS, ProtocolError, describe
from .pso import EstimationResult, estimate
from .scenarios import SCENARIO_MEMBERS, BaseSeriesCache, build_dataset, enumerate_scenarios, scenarios_json
from .series import TimeSeries
from .spm import SimulationError, Simulator

log = logging.getLogger("spmbench")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_MISSING, EXIT_DEGENERATE = 0, 2, 3, 4, 5


class MissingInputError(RuntimeError):
    pass


class AnalysisError(RuntimeError):
    pass


# -- file layout ---------------------------------------------------------------

def base_name(designation: str) -> str:
    return designation.replace("/", "_")


def base_path(out: Path, designation: str) -> Path:
    return out / "base" / f"{base_name(designation)}.csv"


def scenario_path(out: Path, sid: int) -> Path:
    return out / "scenarios" / f"scenario_{sid:02d}.csv"


def case_path(out: Path, cid: int) -> Path:
    return out / "cases" / f"case_{cid:02d}.json"


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=1, allow_nan=False) + "\n")


def _read_json(path: Path):
    if not path.exists():
        raise MissingInputError(f"{path} not found")
    return json.loads(path.read_text())


def _read_series(path: Path) -> TimeSeries:
    if not path.exists():
        raise MissingInputError(f"{path} not found (run 'synth' first)")
    return TimeSeries.read(path)


def _read_matrix(path: Path) -> RmseMatrix:
    try:
        return RmseMatrix.from_csv_text(path.read_text())
    except ValueError as exc:
        raise AnalysisError(f"{path}: {exc}") from None


def _simulator(cfg: ExperimentConfig) -> Simulator:
    return Simulator(cfg.constants, cfg.solver, cfg.ocp_pair())


# -- commands ------------------------------------------------------------------

def cmd_synth(cfg: ExperimentConfig) -> dict:
    out = cfg.out
    (out / "base").mkdir(parents=True, exist_ok=True)
    (out / "scenarios").mkdir(parents=True, exist_ok=True)
    cache = BaseSeriesCache(cfg.ground_truth, cfg.limits, cfg.solver, cfg.ocp_pair(), cfg.profiles,
                            cfg.constants)
    manifest = {"base": {}, "scenarios": {}}
    cap = cfg.limits.nominal_capacity_ah
    for d in DESIGNATIONS:
        s = cache[d]
        path = s.write(base_path(out, d))
        info = describe(s, cap)
        manifest["base"][d] = {"file": str(path.relative_to(out)), "duration_h": info["duration_h"],
                               "equivalent_c_rate": info["equivalent_c_rate"], "rows": len(s),
                               "sha256": s.checksum()}
        log.info("base %-4s %6.2f h  C/%.2f", d, info["duration_h"], 1.0 / info["equivalent_c_rate"])
    scenarios = enumerate_scenarios(cache.base_durations())
    (out / "scenarios.json").write_text(scenarios_json(scenarios))
    wanted = set(cfg.cases) | set(cfg.scenarios)
    for sc in scenarios:
        if sc.id not in wanted:
            continue
        s = build_dataset(sc, cache=cache)
        path = s.write(scenario_path(out, sc.id))
        manifest["scenarios"][str(sc.id)] = {
            "file": str(path.relative_to(out)), "members": list(sc.members), "duration_h": sc.duration_h,
            "equivalent_c_rate": describe(s, cap)["equivalent_c_rate"], "rows": len(s),
            "sha256": s.checksum(),
        }
    _write_json(out / "manifest.json", manifest)
    log.info("wrote %d base and %d scenario datasets to %s", len(DESIGNATIONS),
             len(manifest["scenarios"]), out)
    return manifest


def cmd_estimate(cfg: ExperimentConfig) -> list[dict]:
    out = cfg.out
    manifest = _read_json(out / "manifest.json")
    datasets = {cid: _read_series(scenario_path(out, cid)) for cid in cfg.cases}
    (out / "cases").mkdir(exist_ok=True)
    sim = _simulator(cfg)
    results = []
    for cid in cfg.cases:
        ds = datasets[cid]
        swarm = cfg.swarm_for(cid)
        log.info("case %d %s: %d samples, %d particles x %d iterations", cid, SCENARIO_MEMBERS[cid],
                 len(ds), swarm.n_particles, swarm.n_iterations)
        res = estimate(ds, cfg.search_space, swarm, sim, workers=cfg.workers)
        train = float(np.sqrt(res.best_fitness / len(ds)))
        doc = {
            "case_id": cid,
            "members": list(SCENARIO_MEMBERS[cid]),
            "dataset_sha256": manifest["scenarios"][str(cid)]["sha256"],
            "t_exp_h": manifest["scenarios"][str(cid)]["duration_h"],
            "training_rmse": train,
            "swarm": swarm.to_dict(),
            "search_space": cfg.search_space.to_dict(),
            "result": res.to_dict(),
        }
        _write_json(case_path(out, cid), doc)
        log.info("case %d: training RMSE %.4f V, %.1f s", cid, train, res.t_opt_s)
        results.append(doc)
    return results


def _load_cases(cfg: ExperimentConfig) -> list[CaseRecord]:
    records = []
    for cid in cfg.cases:
        doc = _read_json(case_path(cfg.out, cid))
        res = EstimationResult.from_dict(doc["result"])
        records.append(CaseRecord(cid, res.theta_star, res.t_opt_s / 3600.0, float(doc["t_exp_h"]),
                                  doc.get("training_rmse"), param_errors(res.theta_star, cfg.ground_truth)))
    return records


def cmd_validate(cfg: ExperimentConfig) -> RmseMatrix:
    out = cfg.out
    records = _load_cases(cfg)
    datasets = {sid: _read_series(scenario_path(out, sid)) for sid in cfg.scenarios}
    matrix = cross_validate(records, datasets, _simulator(cfg))
    (out / "rmse_matrix.csv").write_text(matrix.to_csv_text())
    _write_json(out / "rmse_flags.json", matrix.notes)
    _write_json(out / "cases.json", [r.to_dict() for r in records])
    if matrix.flagged:
        log.warning("%d infeasible entries flagged as NaN", len(matrix.flagged))
    return matrix


def _metrics_from_campaign(cfg: ExperimentConfig):
    out = cfg.out
    if not (out / "rmse_matrix.csv").exists():
        raise MissingInputError(f"{out / 'rmse_matrix.csv'} not found (run 'validate' first)")
    matrix = _read_matrix(out / "rmse_matrix.csv")
    records = [CaseRecord.from_dict(d) for d in _read_json(out / "cases.json")]
    if 1 not in matrix.scenario_ids:
        raise AnalysisError("e_y is the Scenario 1 validation RMSE; scenario 1 is not in the matrix")
    by_id = {r.case_id: r for r in records}
    ids = tuple(c for c in matrix.case_ids if c in by_id)
    e_y = np.array([matrix.get(c, 1) for c in ids])
    keep = np.isfinite(e_y)
    if not np.all(keep):
        log.warning("cases %s have no Scenario 1 RMSE and are left out of the cost table",
                    [c for c, k in zip(ids, keep) if not k])
    ids = tuple(c for c, k in zip(ids, keep) if k)
    e_y = e_y[keep]
    e_theta = np.array([by_id[c].errors.delta_dist for c in ids])
    t_total = np.array([by_id[c].t_total_h for c in ids])
    return matrix, records, ids, e_y, e_theta, t_total


def cmd_analyze(cfg: ExperimentConfig, metrics: Path | None = None) -> dict:
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    matrix, records = None, None
    if metrics is not None:
        if not Path(metrics).exists():
            raise MissingInputError(f"{metrics} not found")
        ids, e_y, e_theta, t_total = read_metrics_csv(Path(metrics).read_text())
        if (out / "rmse_matrix.csv").exists():
            matrix = _read_matrix(out / "rmse_matrix.csv")
    else:
        matrix, records, ids, e_y, e_theta, t_total = _metrics_from_campaign(cfg)
    try:
        table = cost_table(ids, e_y, e_theta, t_total)
    except DegenerateNormalizationError as exc:
        raise AnalysisError(f"cannot normalize metrics: {exc}") from None
    (out / "cost_table.csv").write_text(table.to_csv_text())
    optima = [select_optimal(table, name).to_dict(table) for name in table.j]
    _write_json(out / "optima.json", optima)
    if matrix is not None:
        levels = level_reports(matrix, cases=records, cost=table)
    else:
        levels = {"L7": optima, "note": "no RMSE matrix; levels L0 to L6 unavailable"}
    _write_json(out / "levels.json", levels)
    for o in optima:
        log.info("%s %-27s case %2d  J = %.3f", o["option"], o["label"], o["case"], o["min_j"])
    return {"cost_table": table, "optima": optima, "levels": levels}


def _fmt_members(cid):
    return "{" + ",".join(SCENARIO_MEMBERS[cid]) + "}"


def render_report(matrix: RmseMatrix | None, records, table: CostTable | None, optima) -> str:
    lines = []
    if matrix is not None and records:
        lines += ["Per-case metrics", ""]
        lines.append(f"{'Case':>4}  {'Data':<22} {'RMSE train':>10} {'RMSE S1':>8} "
                     f"{'T_opt[h]':>8} {'T_exp[h]':>8} {'T_total[h]':>10}")
        for r in records:
            s1 = matrix.get(r.case_id, 1) if (1 in matrix.scenario_ids and r.case_id in matrix.case_ids) else float("nan")
            train = r.training_rmse if r.training_rmse is not None else float("nan")
            lines.append(f"{r.case_id:>4}  {_fmt_members(r.case_id):<22} {train:>10.4f} {s1:>8.4f} "
                         f"{r.t_opt_h:>8.2f} {r.t_exp_h:>8.1f} {r.t_total_h:>10.1f}")
        lines += ["", "Parameter errors [%]", ""]
        short = ["a-", "a+", "Q-", "Q+", "d-", "d+", "SOC0-", "SOC0+", "R0"]
        lines.append(f"{'Case':>4}  " + " ".join(f"{s:>7}" for s in short) + f" {'mean':>7} {'dist':>10}")
        for r in records:
            e = r.errors
            lines.append(f"{r.case_id:>4}  " + " ".join(f"{x:>7.2f}" for x in e.delta_theta)
                         + f" {e.mean_delta:>7.2f} {e.delta_dist:>10.2f}")
        lines += ["", "RMSE matrix [V] (rows: cases, columns: scenarios)", ""]
        lines.append("case " + " ".join(f"{s:>7d}" for s in matrix.scenario_ids))
        for cid, row in zip(matrix.case_ids, matrix.values):
            lines.append(f"{cid:>4} " + " ".join("    nan" if not np.isfinite(x) else f"{x:>7.4f}" for x in row))
        if matrix.flagged:
            lines.append(f"flagged (infeasible) entries: {matrix.flagged}")
        lines.append("")
    if table is not None:
        lines += ["Cost function", ""]
        lines.append(f"{'Case':>4}  {'e_y[V]':>7} {'e_theta':>9} {'T_total':>8}  "
                     + " ".join(f"{k:>5}" for k in table.j))
        for k, cid in enumerate(table.case_ids):
            lines.append(f"{cid:>4}  {table.e_y[k]:>7.4f} {table.e_theta[k]:>9.2f} {table.t_total[k]:>8.1f}  "
                         + " ".join(f"{v[k]:>5.3f}" for v in table.j.values()))
        lines += ["", "Optimal datasets", ""]
        for o in optima:
            ties = f"  (tied: {o['ties']})" if o["ties"] else ""
            lines.append(f"{o['option']}: {o['label']:<27} J = {o['min_j']:.3f}  case {o['case']:>2} "
                         f"{_fmt_members(o['case']):<22} e_y = {o['e_y']:.4f}  e_theta = {o['e_theta']:.2f}  "
                         f"T_total = {o['t_total']:.1f}{ties}")
    return "\n".join(lines) + "\n"


def cmd_report(cfg: ExperimentConfig) -> str:
    out = cfg.out
    matrix = records = table = None
    optima = []
    mpath = out / "rmse_matrix.csv"
    if mpath.exists():
        text = mpath.read_text()
        if len(text.strip().splitlines()) < 2:
            raise AnalysisError(f"{mpath} is empty")
        matrix = _read_matrix(mpath)
        if not np.any(np.isfinite(matrix.values)):
            raise AnalysisError(f"{mpath} has no finite entries")
        if (out / "cases.json").exists():
            records = [CaseRecord.from_dict(d) for d in _read_json(out / "cases.json")]
    if (out / "cost_table.csv").exists():
        ids, e_y, e_theta, t_total = read_metrics_csv((out / "cost_table.csv").read_text())
        table = cost_table(ids, e_y, e_theta, t_total)
        optima = [select_optimal(table, name).to_dict(table) for name in table.j]
    if matrix is None and table is None:
        raise MissingInputError(f"nothing to report in {out}: run 'validate' or 'analyze' first")
    text = render_report(matrix, records, table, optima)
    (out / "report.txt").write_text(text)
    return text


# -- argument handling -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment JSON (defaults are packaged)")
    common.add_argument("--cases", help="case ids, e.g. '21,29,31' or '1-31'")
    common.add_argument("--scenarios", help="scenario ids, e.g. 'all' or '1,27-31'")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--out", type=Path, help="campaign directory")
    common.add_argument("-q", "--quiet", action="store_true")

    parser = argparse.ArgumentParser(prog="spmbench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="simulate base profiles and scenario datasets")
    sub.add_parser("estimate", parents=[common], help="run the swarm estimator per case")
    sub.add_parser("validate", parents=[common], help="build the cross-validation RMSE matrix")
    p = sub.add_parser("analyze", parents=[common], help="cost table, optima and level reports")
    p.add_argument("--metrics", type=Path, help="CSV with case,e_y,e_theta,t_total to analyze instead")
    sub.add_parser("report", parents=[common], help="write report.txt")
    return parser


def _overrides(args) -> dict:
    o = {"seed": args.seed, "workers": args.workers}
    if args.out is not None:
        o["out"] = str(args.out)
    if args.cases:
        o["cases"] = parse_ids(args.cases)
    if args.scenarios:
        o["scenarios"] = parse_ids(args.scenarios)
    return o


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = ExperimentConfig.load(args.config, _overrides(args))
        if args.command == "synth":
            cmd_synth(cfg)
        elif args.command == "estimate":
            cmd_estimate(cfg)
        elif args.command == "validate":
            cmd_validate(cfg)
        elif args.command == "analyze":
            cmd_analyze(cfg, args.metrics)
        elif args.command == "report":
            print(cmd_report(cfg), end="")
    except ConfigError as exc:
        log.error("config: %s", exc)
        return EXIT_CONFIG
    except (SimulationError, ProtocolError) as exc:
        log.error("infeasible simulation: %s", exc)
        return EXIT_INFEASIBLE
    except MissingInputError as exc:
        log.error("missing input: %s", exc)
        return EXIT_MISSING
    except (AnalysisError, DegenerateNormalizationError) as exc:
        log.error("analysis: %s", exc)
        return EXIT_DEGENERATE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
