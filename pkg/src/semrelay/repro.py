"""Acceptance checks against the published scenario and model properties.

Every check returns a :class:`CheckResult`; ``semrelay repro-paper`` prints
one line per check and exits nonzero if any fails. Tolerances are fixed
here and are not tuned to the outcome.
"""

from __future__ import annotations

import filecmp
import math
import sys
import tempfile
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .channel import (
    V2I,
    V2V,
    LinkRates,
    energy_numeric,
    fading_moment,
    m_constant,
    sample_fading,
    v2i_energy,
    v2v_energy,
)
from .config import bundled_config
from .experiment import plan, write_bundle
from .optimizer import (
    SearchConfig,
    baseline_assign,
    detailed_balance_error,
    empirical_stationary_check,
    exhaustive_solve,
    log_free_energy,
    mmtsa_solve,
    state_values,
)
from .replay import replay
from .scenario import RELAY, TARGET, VehicleState, predict_kinematics
from .semantics import MBIT, SemanticRepresentation, SemanticUnit, bundled_sr
from .strategy import Problem, check_feasibility, derive_schedule
from .throughput import achievable_throughput, cumulative_links

PUBLISHED_QMAX_MBIT = {40.0: 186.6, 50.0: 225.6, 60.0: 264.6}
QMAX_RTOL = 0.005
BASELINE_DIRECT = ["a", "b", "c", "d", "f", "g", "j", "l"]
BASELINE_RELAY = ["e", "h", "i", "k", "m", "n"]
ENERGY_RTOL = 1e-8
REPLAY_RTOL = 0.005


@dataclass(frozen=True)
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number}. {self.name}: {self.detail} ({self.seconds:.2f} s)"


def _timed(number, name, fn, budget=None):
    t0 = time.perf_counter()
    ok, detail = fn()
    dt = time.perf_counter() - t0
    if budget is not None and dt >= budget:
        ok, detail = False, f"{detail}; runtime {dt:.2f} s exceeds {budget:g} s"
    return CheckResult(number, name, bool(ok), detail, dt)


def published_scenario():
    """Kinematics, channel, rates and SR1 of the published scenario."""
    cfg = bundled_config()
    vehicles = list(cfg.vehicles)
    target = next(v for v in vehicles if v.name == cfg.target)
    kin = predict_kinematics(cfg.geometry, target, [v for v in vehicles if v is not target])
    return cfg, kin, LinkRates.from_channel(cfg.channel), bundled_sr("sr1")


def random_problem(rng: np.random.Generator, n_relays: int, n_units: int, weights=None, channel=None):
    """Small random instance on the published road and channel.

    Relays start outside the target's range so every encounter lies ahead.
    Unit sizes and the deadline are drawn so that the direct link alone
    often cannot carry everything.
    """
    cfg = bundled_config()
    geo = cfg.geometry
    target = VehicleState("v0", rng.uniform(0.0, 0.8 * geo.rsu_radius), rng.uniform(9.0, 15.0), TARGET)
    relays = [
        VehicleState(f"v{k + 1}", rng.uniform(-geo.rsu_radius, geo.rsu_radius), rng.uniform(9.0, 16.0), RELAY)
        for k in range(n_relays)
    ]
    kin = predict_kinematics(geo, target, relays)
    units = tuple(
        SemanticUnit(chr(ord("a") + j), float(rng.uniform(0.05, 2.0)), float(rng.uniform(2.0, 40.0)) * MBIT)
        for j in range(n_units)
    )
    sr = SemanticRepresentation(units, "random")
    t_max = float(rng.uniform(15.0, 45.0))
    return Problem(kin, channel or cfg.channel, sr, weights or cfg.weights, t_max)


def check_throughput():
    _, kin, rates, _ = published_scenario()
    links = cumulative_links(kin, rates)
    got = {t: achievable_throughput(links, t) / MBIT for t in PUBLISHED_QMAX_MBIT}
    errs = {t: got[t] / ref - 1.0 for t, ref in PUBLISHED_QMAX_MBIT.items()}
    ok = all(abs(e) <= QMAX_RTOL for e in errs.values())
    detail = ", ".join(
        f"T={t:g}: {got[t]:.2f} vs {PUBLISHED_QMAX_MBIT[t]} ({100 * errs[t]:+.2f}%)" for t in PUBLISHED_QMAX_MBIT
    )
    return ok, detail + f"; tolerance +-{100 * QMAX_RTOL:g}%"


def check_baseline():
    _, kin, rates, sr = published_scenario()
    res = baseline_assign(sr, kin, rates, 40.0)
    a = res.assignment
    direct = sorted(sr.ids[j] for j in a.members(0))
    relay = sorted(sr.ids[j] for j in a.members(1))
    others = [i for i in range(2, kin.n_vehicles) if a.members(i)]
    rep = check_feasibility(a, derive_schedule(a, kin, rates, sr), kin, 40.0)
    ok = direct == BASELINE_DIRECT and relay == BASELINE_RELAY and not others and rep.ok
    return ok, f"v0 <- {{{','.join(direct)}}}, v1 <- {{{','.join(relay)}}}, feasible={rep.ok}"


def check_sr_sums():
    sr = bundled_sr("sr1")
    vol = sr.total_volume / MBIT
    acc = sr.total_accuracy
    ok = vol == 165.0 and abs(acc - 12.83) <= 0.01
    return ok, f"volume {vol:g} Mbit, accuracy {acc:.4f}"


def _v2i_windows(rng, n, r):
    """Windows spread over the four branches of the direct-link energy."""
    out = []
    for branch in range(4):
        for _ in range(n):
            u = rng.uniform(5.0, 20.0)
            if branch == 0:  # entirely before the RSU
                x = rng.uniform(-r, -50.0)
                t_c = -x / u
                ts = rng.uniform(0.0, 0.9 * t_c)
                te = rng.uniform(ts + 1e-3, t_c)
            elif branch == 1:  # entirely past the RSU
                x = rng.uniform(0.0, 0.9 * r)
                t_end = (r - x) / u
                ts = rng.uniform(0.0, 0.9 * t_end)
                te = rng.uniform(ts + 1e-3, t_end)
            elif branch == 2:  # crosses the RSU inside the window
                x = rng.uniform(-r, -50.0)
                t_c = -x / u
                t_end = (r - x) / u
                ts = rng.uniform(0.0, t_c)
                te = rng.uniform(t_c + 1e-3, t_end)
            else:  # crossed the RSU before the window opened
                x = rng.uniform(-r, -50.0)
                t_c = -x / u
                t_end = (r - x) / u
                ts = rng.uniform(t_c + 1e-3, 0.9 * t_end)
                te = rng.uniform(ts + 1e-3, t_end)
            out.append((x, u, ts, te))
    return out


def _v2v_windows(rng, n, r):
    """Windows before, after and across the closest approach."""
    out = []
    for branch in range(3):
        for _ in range(n):
            w = rng.uniform(10.0, 30.0)
            enc = rng.uniform(0.0, 20.0)
            mid = enc + r / w
            end = enc + 2 * r / w
            if branch == 0:
                ts = rng.uniform(enc, mid - 1e-2)
                te = rng.uniform(ts + 1e-3, mid)
            elif branch == 1:
                ts = rng.uniform(mid, end - 1e-2)
                te = rng.uniform(ts + 1e-3, end)
            else:
                ts = rng.uniform(enc, mid)
                te = rng.uniform(mid + 1e-3, end)
            out.append((w, enc, ts, te))
    return out


def energy_oracle_errors(n_per_branch=150, seed=0):
    rng = np.random.default_rng(seed)
    cfg = bundled_config()
    params, geo = cfg.channel, cfg.geometry
    errs = []
    for x, u, ts, te in _v2i_windows(rng, n_per_branch, geo.rsu_radius):
        closed = float(v2i_energy(x, u, ts, te, params))
        num = energy_numeric(V2I, lambda t, x=x, u=u: np.abs(x + u * t), ts, te, params,
                             breakpoints=[-x / u])
        errs.append(abs(closed - num) / abs(num))
    r = geo.vehicle_radius
    for w, enc, ts, te in _v2v_windows(rng, n_per_branch, r):
        closed = float(v2v_energy(w, enc, r, ts, te, params))
        num = energy_numeric(V2V, lambda t, w=w, enc=enc: np.abs(r - w * (t - enc)), ts, te, params,
                             breakpoints=[enc + r / w])
        errs.append(abs(closed - num) / abs(num))
    return np.array(errs)


def check_energy_oracle():
    errs = energy_oracle_errors()
    ok = errs.size >= 1000 and errs.max() <= ENERGY_RTOL
    return ok, f"{errs.size} windows over 7 branches, max relative error {errs.max():.2e} (limit {ENERGY_RTOL:g})"


def check_fading(n=10**6, seed=0):
    cfg = bundled_config()
    ch = cfg.channel
    m, ms, gbar = ch.fading_m, ch.shadowing_ms, ch.mean_gain
    rng = np.random.default_rng(seed)
    g = sample_fading(rng, m, ms, gbar, n)
    first = fading_moment(1, m, ms, gbar)
    mean_err = abs(g.mean() / gbar - 1.0)
    inv_err = abs(np.mean(1.0 / g) / m_constant(m, ms, gbar) - 1.0)
    m_unit = m_constant(6, 6, 1.0)
    ok = math.isclose(first, gbar, rel_tol=1e-12) and mean_err <= 0.01 and inv_err <= 0.02 and math.isclose(
        m_unit, 1.44, rel_tol=1e-12
    )
    return ok, (
        f"E[g]={first:.12g} (gbar {gbar:.12g}); MC mean err {100 * mean_err:.3f}%; "
        f"MC E[1/g] err {100 * inv_err:.3f}%; M(6,6,1)={m_unit:.12g}"
    )


def check_markov(n_sandwich=100, steps=10**6, seed=0):
    rng = np.random.default_rng(seed)
    # (a) detailed balance on one instance with 3^6 states
    prob = random_problem(rng, 2, 6)
    u = state_values(prob)
    temp = float(np.std(u[u < prob.penalty])) or 1.0
    db = detailed_balance_error(u, prob.n_vehicles, prob.n_units, temp)
    # (b) occupancy of the search kernel vs the Gibbs vector, 3^5 states
    prob_b = random_problem(rng, 2, 5)
    u_b = state_values(prob_b)
    temp_b = float(np.std(u_b[u_b < prob_b.penalty])) or 1.0
    tv = empirical_stationary_check(prob_b, temp_b, steps, seed=seed, u=u_b)
    # (c) free-energy sandwich
    worst = -math.inf
    for _ in range(n_sandwich):
        p = random_problem(rng, int(rng.integers(1, 4)), int(rng.integers(2, 7)))
        uu = state_values(p)
        t = float(rng.uniform(0.01, 2.0))
        f = log_free_energy(uu, t)
        lo = uu.min() - t * math.log(uu.size)
        slack = max(lo - f, f - uu.min())
        worst = max(worst, slack / max(1.0, abs(uu.min())))
    ok = db <= 1e-12 and tv <= 0.05 and worst <= 1e-12
    return ok, f"detailed balance {db:.1e} (limit 1e-12); TV {tv:.4f} (limit 0.05); sandwich worst violation {worst:.1e}"


def check_solver(n_instances=50, seed=0):
    rng = np.random.default_rng(seed)
    hits = never_worse = 0
    for k in range(n_instances):
        p = random_problem(rng, int(rng.integers(1, 4)), int(rng.integers(2, 7)))
        _, u_star = exhaustive_solve(p)
        u_base = p.u_hat(baseline_assign(p.sr, p.kinematics, p.rates, p.t_max).assignment)
        best, _ = mmtsa_solve(p, SearchConfig(iterations=10 * p.n_states, seed=k))
        u_best = p.u_hat(best)
        hits += u_best <= u_star + 1e-12 * max(1.0, abs(u_star))
        never_worse += u_best <= u_base
    rate = hits / n_instances

    cfg, kin, rates, sr = published_scenario()
    res = {}
    for t_max in (40.0, 50.0, 60.0):
        res[t_max] = plan(cfg.with_overrides(t_max=t_max))
    r40 = res[40.0]
    ev_m, ev_b = r40.evaluation("mmtsa"), r40.evaluation("baseline")
    published_ok = ev_m["u_hat"] <= ev_b["u_hat"]
    v2v_small = all(
        ev["p_v2v"] < 0.1 * ev["p_v2i"] for ev in (ev_m, ev_b)
    )
    energies = [res[t].evaluation("mmtsa")["p_v2i"] + res[t].evaluation("mmtsa")["p_v2v"] for t in (40.0, 50.0, 60.0)]
    decreasing = energies[0] > energies[1] > energies[2]

    # reliability-dominant weights pull the important units onto the direct link
    w = replace(cfg.weights, kappa_energy=0.01, kappa_reliability=1.0)
    prob = Problem(kin, cfg.channel, sr, w, 40.0)
    best, _ = mmtsa_solve(prob, cfg.search)
    direct = best.rows == 0
    a = sr.alpha
    alpha_ok = direct.any() and (~direct).any() and a[direct].mean() > a[~direct].mean()
    alpha_ok = alpha_ok or direct.all()

    ok = rate >= 0.95 and never_worse == n_instances and published_ok and v2v_small and decreasing and alpha_ok
    return ok, (
        f"optimum hit {hits}/{n_instances}; never worse than baseline {never_worse}/{n_instances}; "
        f"published U_hat {ev_m['u_hat']:.4f} vs baseline {ev_b['u_hat']:.4f}; "
        f"V2V << V2I {v2v_small}; energy 40/50/60 s = {energies[0]:.3f}/{energies[1]:.3f}/{energies[2]:.3f} J; "
        f"high-alpha direct {alpha_ok}"
    )


def check_replay():
    cfg = bundled_config()
    r = plan(cfg)
    parts, ok = [], True
    for name in ("baseline", "mmtsa"):
        a = r.assignment(name)
        ev = r.evaluation(name)
        planned = ev["p_v2i"] + ev["p_v2v"]
        gaps = []
        for step in (2e-3, 1e-3):
            rep = replay(r.problem, a, step=step)
            gaps.append(abs(rep.total_energy / planned - 1.0))
            if step == 1e-3:
                full = not rep.undelivered and len(rep.delivered) == r.sr.n
        ok &= full and gaps[1] <= REPLAY_RTOL and gaps[1] < gaps[0]
        parts.append(f"{name}: all delivered {full}, gap {gaps[1]:.2e} at 1 ms, {gaps[0]:.2e} at 2 ms")
    return ok, "; ".join(parts)


def check_determinism(iterations=None):
    cfg = bundled_config()
    if iterations is not None:
        cfg = cfg.with_overrides(search=replace(cfg.search, iterations=iterations))
    with tempfile.TemporaryDirectory() as tmp:
        dirs = [Path(tmp) / "a", Path(tmp) / "b"]
        names = None
        for d in dirs:
            paths = write_bundle(plan(cfg), d)
            names = sorted(p.name for k, p in paths.items() if k != "timings")
        match, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], names, shallow=False)
    ok = len(match) == len(names) and not mismatch and not errors
    return ok, f"{len(match)}/{len(names)} bundle files byte-identical across two runs"


def run_all(quick=False, out=sys.stdout) -> list:
    checks = [
        (1, "throughput reproduction", check_throughput, 1.0),
        (2, "baseline reproduction", check_baseline, 1.0),
        (3, "SR fixture sums", check_sr_sums, None),
        (4, "energy closed form vs quadrature", check_energy_oracle, 30.0),
        (5, "fading model", (lambda: check_fading(10**5)) if quick else check_fading, None),
        (6, "Markov approximation", (lambda: check_markov(20, 2 * 10**5)) if quick else check_markov, 120.0),
        (7, "solver quality", (lambda: check_solver(10)) if quick else check_solver, None),
        (8, "replay consistency", check_replay, None),
        (9, "determinism", (lambda: check_determinism(2000)) if quick else check_determinism, None),
    ]
    results = []
    for number, name, fn, budget in checks:
        res = _timed(number, name, fn, budget)
        results.append(res)
        if out is not None:
            print(res.line(), file=out, flush=True)
    if out is not None:
        n_pass = sum(r.passed for r in results)
        print(f"{n_pass}/{len(results)} checks passed", file=out)
    return results
