"""End-to-end planning, replay and report writing.

Bundles are byte-deterministic for a given config and seed: every file
holds only values derived from the inputs. Wall-clock runtimes go to a
separate ``timings.json`` that is not part of the bundle.
"""

from __future__ import annotations

import csv
import json
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .errors import StateSpaceTooLargeError
from .optimizer import BaselineResult, SearchTrace, baseline_assign, exhaustive_solve, mmtsa_solve
from .replay import ExecutionReport, perturbed_motion, predicted_motion, replay, trace_motion
from .scenario import Kinematics, predict_kinematics
from .semantics import MBIT, SemanticRepresentation, extract_sr, load_sr, load_wdg
from .strategy import Assignment, Problem, derive_schedule, strategy_document, write_strategy
from .throughput import ThroughputAnalysis, cumulative_links
from .traces import load_trace

STRATEGIES = ("baseline", "mmtsa")

METRIC_FIELDS = (
    "strategy",
    "q_max_mbit",
    "sr_volume_mbit",
    "p_v2i_j",
    "p_v2v_j",
    "total_energy_j",
    "theta",
    "accuracy",
    "ee_s",
    "feasible",
    "u",
    "u_hat",
)


@dataclass
class PlanResult:
    config: ExperimentConfig
    kinematics: Kinematics
    analysis: ThroughputAnalysis
    q_max: float
    sr: SemanticRepresentation
    problem: Problem
    baseline: BaselineResult
    best: Assignment
    trace: SearchTrace
    infeasible_likely: bool = False
    timings: dict = field(default_factory=dict)

    def assignment(self, strategy: str) -> Assignment:
        if strategy == "baseline":
            return self.baseline.assignment
        if strategy == "mmtsa":
            return self.best
        raise ValueError(f"unknown strategy {strategy!r}")

    def evaluation(self, strategy: str) -> dict:
        return self.problem.evaluate(self.assignment(strategy))

    def schedule(self, strategy: str):
        return derive_schedule(self.assignment(strategy), self.kinematics, self.problem.rates, self.sr)


def scenario_vehicles(config: ExperimentConfig):
    if config.trace_path is not None:
        trace = load_trace(config.trace_path)
        return trace.vehicle_states(config.geometry, config.target), trace
    return list(config.vehicles), None


def plan(config: ExperimentConfig) -> PlanResult:
    """Predict, size the throughput, fix the SR, then run both assigners."""
    timings = {}
    t0 = time.perf_counter()
    vehicles, _ = scenario_vehicles(config)
    target = next(v for v in vehicles if v.name == config.target)
    relays = [v for v in vehicles if v.name != config.target]
    kin = predict_kinematics(config.geometry, target, relays)
    analysis = cumulative_links(kin, _rates(config), config.t_max)
    q_max = analysis.q_max(config.t_max)
    timings["throughput_s"] = time.perf_counter() - t0

    if config.extract:
        sr = extract_sr(load_wdg(config.sr_path), q_max)
    else:
        sr = load_sr(config.sr_path)
    infeasible_likely = sr.total_volume > q_max
    if infeasible_likely:
        warnings.warn(
            f"SR volume {sr.total_volume / MBIT:.2f} Mbit exceeds achievable {q_max / MBIT:.2f} Mbit",
            stacklevel=2,
        )

    problem = Problem(kin, config.channel, sr, config.weights, config.t_max)
    t0 = time.perf_counter()
    base = baseline_assign(sr, kin, problem.rates, config.t_max)
    timings["baseline_s"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    best, trace = mmtsa_solve(problem, config.search)
    timings["mmtsa_s"] = time.perf_counter() - t0
    return PlanResult(config, kin, analysis, q_max, sr, problem, base, best, trace, infeasible_likely, timings)


def _rates(config):
    from .channel import LinkRates

    return LinkRates.from_channel(config.channel)


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def metrics_row(result: PlanResult, strategy: str) -> dict:
    ev = result.evaluation(strategy)
    energy = ev["p_v2i"] + ev["p_v2v"]
    acc = result.sr.total_accuracy
    return {
        "strategy": strategy,
        "q_max_mbit": result.q_max / MBIT,
        "sr_volume_mbit": result.sr.total_volume / MBIT,
        "p_v2i_j": ev["p_v2i"],
        "p_v2v_j": ev["p_v2v"],
        "total_energy_j": energy,
        "theta": ev["theta"],
        "accuracy": acc,
        "ee_s": acc / energy if energy > 0 else float("nan"),
        "feasible": ev["feasible"],
        "u": ev["u"],
        "u_hat": ev["u_hat"],
    }


def strategy_doc(result: PlanResult, strategy: str) -> dict:
    return strategy_document(
        result.assignment(strategy),
        result.kinematics,
        result.sr,
        name=strategy,
        extra={"t_max_s": result.config.t_max, "sr": result.sr.name},
    )


def summary_text(result: PlanResult, strategies=STRATEGIES) -> str:
    kin = result.kinematics
    lines = [
        f"experiment: {result.config.name}",
        f"vehicles: target {kin.target.name} + {kin.n_relays} relays"
        + (f" ({len(kin.excluded)} excluded)" if kin.excluded else ""),
        f"T_max: {result.config.t_max:g} s",
        f"achievable throughput: {result.q_max / MBIT:.2f} Mbit",
        f"SR: {result.sr.name or 'unnamed'}, {result.sr.n} units, "
        f"{result.sr.total_volume / MBIT:.2f} Mbit, accuracy {result.sr.total_accuracy:.2f}",
        f"search: {result.config.search.iterations} iterations, temperature {result.trace.temperature:.6g}, "
        f"{result.trace.n_accepted} accepted",
    ]
    if result.infeasible_likely:
        lines.append("warning: SR volume exceeds the achievable throughput")
    for s in strategies:
        m = metrics_row(result, s)
        lines.append("")
        lines.append(f"[{s}] feasible={_fmt(m['feasible'])}")
        for vname, ids in strategy_doc(result, s)["assignment"].items():
            lines.append(f"  {vname}: {', '.join(ids)}")
        lines.append(
            f"  P_V2I = {m['p_v2i_j']:.6f} J, P_V2V = {m['p_v2v_j']:.6f} J, "
            f"Theta = {m['theta']:.4f}, U = {m['u']:.6f}, EE_S = {m['ee_s']:.6f} 1/J"
        )
    return "\n".join(lines) + "\n"


def _prepare_dir(out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write_probe"
    probe.write_text("")
    probe.unlink()
    return out


def write_bundle(result: PlanResult, out_dir, strategies=STRATEGIES) -> dict:
    out = _prepare_dir(out_dir)
    paths = {}
    for s in strategies:
        p = out / f"strategy_{s}.json"
        write_strategy(p, strategy_doc(result, s))
        paths[f"strategy_{s}"] = p
    p = out / "metrics.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRIC_FIELDS)
        for s in strategies:
            m = metrics_row(result, s)
            w.writerow([_fmt(m[k]) for k in METRIC_FIELDS])
    paths["metrics"] = p
    p = out / "search_trace.csv"
    result.trace.write_csv(p)
    paths["search_trace"] = p
    p = out / "summary.txt"
    p.write_text(summary_text(result, strategies))
    paths["summary"] = p
    p = out / "timings.json"
    p.write_text(json.dumps({k: round(v, 6) for k, v in result.timings.items()}, indent=2) + "\n")
    paths["timings"] = p
    return paths


def run_experiment(config: ExperimentConfig, out_dir, strategies=STRATEGIES) -> dict:
    result = plan(config)
    return write_bundle(result, out_dir, strategies)


def actual_motion(result: PlanResult, seed=None, trace_path=None, sigma=None):
    cfg = result.config
    if trace_path is not None:
        return trace_motion(result.kinematics, load_trace(trace_path), cfg.target, cfg.t_max)
    if cfg.perturbation.kind == "trace" and cfg.trace_path is not None:
        return trace_motion(result.kinematics, load_trace(cfg.trace_path), cfg.target, cfg.t_max)
    sigma = cfg.perturbation.sigma if sigma is None and cfg.perturbation.kind == "gaussian" else sigma
    if sigma:
        return perturbed_motion(result.kinematics, sigma, seed)
    return predicted_motion(result.kinematics)


def report_dict(report: ExecutionReport) -> dict:
    return {
        "delivered": list(report.delivered),
        "undelivered": list(report.undelivered),
        "accuracy": report.accuracy,
        "planned_accuracy": report.planned_accuracy,
        "p_v2i_j": report.p_v2i,
        "p_v2v_j": report.p_v2v,
        "completion_time_s": report.completion_time,
        "ee_s": report.ee_s,
        "actual_speeds_mps": list(report.actual_speeds),
        "links": [r.__dict__ for r in report.links],
    }


def write_replay(report: ExecutionReport, out_dir, tag: str) -> Path:
    out = _prepare_dir(out_dir)
    p = out / f"replay_{tag}.json"
    p.write_text(json.dumps(report_dict(report), indent=2) + "\n")
    return p


def _replay_seed(args):
    problem, rows, sigma, seed, step = args
    from .replay import perturbed_motion as pm

    a = Assignment(rows, problem.n_vehicles)
    return seed, replay(problem, a, pm(problem.kinematics, sigma, seed), step)


def sweep(result: PlanResult, seeds, sigma: float, strategy="mmtsa", jobs=1):
    """Replay one plan under independent speed perturbations, one per seed."""
    rows = result.assignment(strategy).rows
    step = result.config.replay_step
    tasks = [(result.problem, rows, sigma, int(s), step) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(_replay_seed, tasks))
    else:
        out = [_replay_seed(t) for t in tasks]
    return sorted(out, key=lambda x: x[0])


SWEEP_FIELDS = (
    "seed",
    "n_delivered",
    "direct_delivered",
    "accuracy",
    "p_v2i_j",
    "p_v2v_j",
    "completion_time_s",
    "ee_s",
    "target_dwell_change",
)


def sweep_rows(result: PlanResult, runs, strategy="mmtsa") -> list:
    """One dict per seed; ``target_dwell_change`` is the relative change of v0's dwell."""
    kin = result.kinematics
    d0 = kin.dwell[0]
    direct = {result.sr.ids[j] for j in result.assignment(strategy).members(0)}
    rows = []
    for seed, rep in runs:
        dwell = (kin.geometry.rsu_radius - kin.offsets[0]) / rep.actual_speeds[0]
        rows.append({
            "seed": seed,
            "n_delivered": len(rep.delivered),
            "direct_delivered": direct <= set(rep.delivered),
            "accuracy": rep.accuracy,
            "p_v2i_j": rep.p_v2i,
            "p_v2v_j": rep.p_v2v,
            "completion_time_s": rep.completion_time,
            "ee_s": rep.ee_s,
            "target_dwell_change": dwell / d0 - 1.0,
        })
    return rows


def write_sweep(result: PlanResult, runs, out_dir, strategy="mmtsa") -> Path:
    out = _prepare_dir(out_dir)
    p = out / "sweep.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_FIELDS)
        for row in sweep_rows(result, runs, strategy):
            w.writerow([_fmt(row[k]) for k in SWEEP_FIELDS])
    return p


def oracle(result: PlanResult) -> dict:
    """Exhaustive optimum of the planning problem next to both assigners."""
    problem = result.problem
    if problem.n_states > 10**6:
        raise StateSpaceTooLargeError(f"{problem.n_states} states; the oracle handles at most 1e6")
    best, u_star = exhaustive_solve(problem)
    return {
        "n_states": problem.n_states,
        "optimum_u_hat": u_star,
        "optimum": strategy_document(best, result.kinematics, result.sr, "exhaustive")["assignment"],
        "baseline_u_hat": result.evaluation("baseline")["u_hat"],
        "mmtsa_u_hat": result.evaluation("mmtsa")["u_hat"],
        "mmtsa_is_optimal": bool(np.isclose(result.evaluation("mmtsa")["u_hat"], u_star, rtol=1e-12, atol=0)),
    }
