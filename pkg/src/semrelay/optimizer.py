"""Baseline spill assignment, Markov-approximation search and exact oracles.

The search chain lives on the set of all assignments. From state ``x`` it
picks a unit uniformly, moves it to a uniformly chosen *other* vehicle and
accepts with the Metropolis ratio ``min(1, exp((U(x) - U(x')) / T))``.
With ``N`` units and ``V+1`` vehicles every single-unit move is proposed
with probability ``1/(N V)``, and the chain is reversible with respect to
the Gibbs distribution ``p(x) ~ exp(-U(x)/T)``.

Small instances are handled exactly by enumerating every state in
mixed-radix order (state code ``sum_j rows[j] * (V+1)**j``).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .channel import LinkRates
from .errors import EmptyResultError, InvalidParameterError, StateSpaceTooLargeError
from .scenario import Kinematics
from .semantics import SemanticRepresentation
from .strategy import Assignment, Problem, evaluate_batch

MAX_EXACT_STATES = 10**6

_ATOL_BITS = 1e-6


@dataclass(frozen=True)
class BaselineResult:
    assignment: Assignment
    feasible: bool
    forward_start: np.ndarray
    residual: float = 0.0


def baseline_assign(sr: SemanticRepresentation, kin: Kinematics, rates: LinkRates, t_max=None) -> BaselineResult:
    """Spill assignment: everything on the target, overflow down the relay chain.

    Each vehicle in turn keeps its units while its capacity allows and
    hands its smallest units (ties by column order) to the next relay.
    A relay's capacity is what it can pre-store before its forward start
    and what it can forward before its window closes, and, when
    ``t_max`` is given, before the deadline. ``feasible`` is False when
    the last relay still overflows; the returned assignment is then still
    a valid search seed.
    """
    n = kin.n_vehicles
    beta = sr.beta
    rows = np.zeros(sr.n, dtype=np.int64)
    starts = np.full(n, np.nan)
    residual = 0.0
    for i in range(n):
        if i == 0:
            cap = rates.v2i * kin.dwell[0]
        else:
            stop = kin.window_end[i] if t_max is None else min(kin.window_end[i], t_max)
            cap = max(0.0, min(rates.v2i * min(kin.dwell[i], starts[i]), rates.v2v * (stop - starts[i])))
        members = [j for j in np.argsort(beta, kind="stable") if rows[j] == i]
        load = float(beta[rows == i].sum())
        k = 0
        while load > cap + _ATOL_BITS and k < len(members):
            if i == n - 1:
                break
            j = members[k]
            rows[j] = i + 1
            load -= beta[j]
            k += 1
        if load > cap + _ATOL_BITS:
            residual = load - cap
        if i + 1 < n:
            if i == 0:
                ready = load / rates.v2i
            else:
                ready = starts[i] + load / rates.v2v
            starts[i + 1] = min(max(kin.encounter[i + 1], ready), kin.window_end[i + 1])
    return BaselineResult(Assignment(rows, n), residual == 0.0, starts, residual)


def transition_prob(u_cur, u_next, temperature) -> float:
    """Metropolis acceptance probability, evaluated in log space."""
    if not temperature > 0:
        raise InvalidParameterError("temperature must be positive")
    return float(math.exp(min(0.0, (u_cur - u_next) / temperature)))


def log_transition(u_cur, u_next, temperature):
    return np.minimum(0.0, (np.asarray(u_cur) - np.asarray(u_next)) / temperature)


@dataclass(frozen=True)
class SearchConfig:
    temperature: float | None = None
    iterations: int = 10_000
    seed: int = 0
    init: str = "baseline"
    initial_rows: tuple | None = None
    temperature_samples: int = 1000

    def __post_init__(self):
        if self.iterations < 1:
            raise InvalidParameterError("iterations must be >= 1")
        if self.temperature is not None and not self.temperature > 0:
            raise InvalidParameterError("temperature must be positive")
        if self.init not in ("baseline", "all-direct", "given"):
            raise InvalidParameterError(f"unknown init {self.init!r}")
        if self.init == "given" and self.initial_rows is None:
            raise InvalidParameterError("init='given' needs initial_rows")


@dataclass
class SearchTrace:
    current: np.ndarray
    best: np.ndarray
    accepted: np.ndarray
    best_assignment: Assignment
    initial: Assignment
    temperature: float
    n_accepted: int = field(default=0)

    @property
    def best_u_hat(self) -> float:
        return float(self.best[-1]) if self.best.size else math.nan

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "current_U_hat", "best_U_hat", "accepted"])
            for k in range(self.current.size):
                w.writerow([k + 1, repr(float(self.current[k])), repr(float(self.best[k])), int(self.accepted[k])])


def estimate_temperature(problem: Problem, samples=1000, seed=0) -> float:
    """A tenth of the 5-95 percentile spread of U over random assignments.

    Penalised states are part of the sample, so on instances where many
    random assignments are infeasible the spread reflects the penalty.
    Falls back to a tenth of the penalty when the spread is zero.
    """
    rng = np.random.default_rng(seed)
    rows = rng.integers(0, problem.n_vehicles, size=(samples, problem.n_units))
    u = evaluate_batch(problem, rows)["u_hat"]
    lo, hi = np.percentile(u, [5, 95])
    spread = (hi - lo) / 10.0
    return float(spread) if spread > 0 else 0.1 * problem.penalty


def _initial_rows(problem: Problem, config: SearchConfig) -> np.ndarray:
    if config.init == "given":
        return Assignment(config.initial_rows, problem.n_vehicles).rows.copy()
    if config.init == "all-direct":
        return np.zeros(problem.n_units, dtype=np.int64)
    return baseline_assign(problem.sr, problem.kinematics, problem.rates, problem.t_max).assignment.rows.copy()


def mmtsa_solve(problem: Problem, config: SearchConfig = SearchConfig(), u_table=None):
    """Markov-approximation search with best-so-far tracking.

    Every evaluated proposal is a candidate for the incumbent, whether or
    not the chain moves to it. Returns ``(best_assignment, trace)``.

    ``u_table``, the output of :func:`state_values`, replaces objective
    evaluation by lookup on small instances; the random stream and hence
    the accept/reject sequence are unchanged.
    """
    rng = np.random.default_rng(config.seed)
    temp = config.temperature
    if temp is None:
        temp = estimate_temperature(problem, config.temperature_samples, config.seed)
    rows = _initial_rows(problem, config)
    n_veh, n_units = problem.n_vehicles, problem.n_units
    initial = Assignment(rows, n_veh)
    if u_table is not None:
        u_cur = float(u_table[int(encode_states(rows, n_veh))])
    else:
        u_cur = float(evaluate_batch(problem, rows[None, :])["u_hat"][0])
    best_rows, u_best = rows.copy(), u_cur

    iters = config.iterations
    cur_hist = np.empty(iters)
    best_hist = np.empty(iters)
    acc_hist = np.zeros(iters, dtype=bool)
    if n_veh < 2 or n_units == 0:
        cur_hist[:] = u_cur
        best_hist[:] = u_best
        return initial, SearchTrace(cur_hist, best_hist, acc_hist, initial, initial, temp, 0)

    cols = rng.integers(0, n_units, size=iters)
    shifts = rng.integers(1, n_veh, size=iters)
    log_u = np.log(rng.random(iters))
    cache = {}
    radix = n_veh ** np.arange(n_units, dtype=np.int64)
    n_acc = 0
    for k in range(iters):
        j = cols[k]
        old = rows[j]
        rows[j] = (old + shifts[k]) % n_veh
        if u_table is not None:
            u_new = float(u_table[int(rows @ radix)])
        else:
            key = rows.tobytes()
            u_new = cache.get(key)
            if u_new is None:
                u_new = float(evaluate_batch(problem, rows[None, :])["u_hat"][0])
                cache[key] = u_new
        if u_new < u_best:
            u_best, best_rows = u_new, rows.copy()
        if log_u[k] < min(0.0, (u_cur - u_new) / temp):
            u_cur = u_new
            acc_hist[k] = True
            n_acc += 1
        else:
            rows[j] = old
        cur_hist[k] = u_cur
        best_hist[k] = u_best
    best = Assignment(best_rows, n_veh)
    return best, SearchTrace(cur_hist, best_hist, acc_hist, best, initial, temp, n_acc)


def _check_size(problem: Problem):
    if problem.n_states > MAX_EXACT_STATES:
        raise StateSpaceTooLargeError(f"{problem.n_states} states exceed the exact limit of {MAX_EXACT_STATES}")


def all_states(n_vehicles: int, n_units: int) -> np.ndarray:
    """Every row-index vector, in mixed-radix code order."""
    codes = np.arange(n_vehicles**n_units, dtype=np.int64)
    return decode_states(codes, n_vehicles, n_units)


def decode_states(codes, n_vehicles: int, n_units: int) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    radix = n_vehicles ** np.arange(n_units, dtype=np.int64)
    return (codes[..., None] // radix) % n_vehicles


def encode_states(rows, n_vehicles: int) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.int64)
    radix = n_vehicles ** np.arange(rows.shape[-1], dtype=np.int64)
    return rows @ radix


def state_values(problem: Problem, chunk=65536) -> np.ndarray:
    """Penalised objective of every state, indexed by state code."""
    _check_size(problem)
    n_states = problem.n_states
    out = np.empty(n_states)
    for lo in range(0, n_states, chunk):
        codes = np.arange(lo, min(lo + chunk, n_states))
        out[lo : lo + codes.size] = evaluate_batch(problem, decode_states(codes, problem.n_vehicles, problem.n_units))[
            "u_hat"
        ]
    return out


def exhaustive_solve(problem: Problem):
    """Global minimiser of the penalised objective.

    Ties go to the lexicographically smallest row vector (unit 0 first).
    Returns ``(assignment, u_hat)``.
    """
    u = state_values(problem)
    rows = all_states(problem.n_vehicles, problem.n_units)
    best = np.flatnonzero(u == u.min())
    cand = rows[best]
    order = np.lexsort(cand.T[::-1])
    return Assignment(cand[order[0]], problem.n_vehicles), float(u.min())


def gibbs_log_probs(u, temperature) -> np.ndarray:
    x = -np.asarray(u, dtype=float) / temperature
    return x - logsumexp(x)


def stationary_distribution(problem: Problem, temperature) -> np.ndarray:
    """Gibbs probabilities of every state, indexed by state code."""
    return np.exp(gibbs_log_probs(state_values(problem), temperature))


def log_free_energy(u, temperature) -> float:
    """``-T ln sum exp(-U/T)``, the smoothed minimum of ``u``."""
    return float(-temperature * logsumexp(-np.asarray(u, dtype=float) / temperature))


def neighbors(codes, n_vehicles: int, n_units: int) -> np.ndarray:
    """Codes of every single-unit move, shape ``(len(codes), N*V)``."""
    codes = np.asarray(codes, dtype=np.int64)
    rows = decode_states(codes, n_vehicles, n_units)
    radix = n_vehicles ** np.arange(n_units, dtype=np.int64)
    out = []
    for j in range(n_units):
        for s in range(1, n_vehicles):
            new = (rows[:, j] + s) % n_vehicles
            out.append(codes + (new - rows[:, j]) * radix[j])
    return np.stack(out, axis=1)


def transition_matrix(u, n_vehicles: int, n_units: int, temperature) -> np.ndarray:
    """Dense one-step kernel of the search chain."""
    n_states = u.size
    if n_states > 20000:
        raise StateSpaceTooLargeError("dense transition matrix limited to 20000 states")
    codes = np.arange(n_states)
    nb = neighbors(codes, n_vehicles, n_units)
    rate = 1.0 / (n_units * (n_vehicles - 1))
    p = np.zeros((n_states, n_states))
    acc = np.exp(log_transition(u[:, None], u[nb], temperature)) * rate
    np.add.at(p, (np.repeat(codes, nb.shape[1]), nb.ravel()), acc.ravel())
    p[codes, codes] += 1.0 - acc.sum(axis=1)
    return p


def detailed_balance_error(u, n_vehicles: int, n_units: int, temperature) -> float:
    """Largest log-space gap ``|ln p(x)q(x,y) - ln p(y)q(y,x)|`` over moves."""
    logp = gibbs_log_probs(u, temperature)
    codes = np.arange(u.size)
    nb = neighbors(codes, n_vehicles, n_units)
    fwd = logp[:, None] + log_transition(u[:, None], u[nb], temperature)
    bwd = logp[nb] + log_transition(u[nb], u[:, None], temperature)
    return float(np.max(np.abs(fwd - bwd)))


def tv_mixing_time(p: np.ndarray, pi: np.ndarray, eps=0.25, max_steps=100_000) -> int:
    """Smallest ``t`` with worst-start TV distance to ``pi`` at most ``eps``."""
    dist = np.eye(p.shape[0])
    for t in range(max_steps + 1):
        tv = 0.5 * np.abs(dist - pi[None, :]).sum(axis=1).max()
        if tv <= eps:
            return t
        dist = dist @ p
    return -1


@dataclass(frozen=True)
class MixingBounds:
    lower: float
    upper: float
    status: str


def mixing_time_bounds(n_units: int, n_relays: int, u_max: float, u_min: float, temperature: float, eps: float,
                       n_states=None) -> MixingBounds:
    """Spectral lower and path-coupling upper bounds on the mixing time.

    The rate constant is ``1/(N V)``. The state-count factor of the lower
    bound is taken as the number of states. The upper bound is reported
    only when the temperature clears the stated threshold (status
    ``'ok'``); otherwise its denominator is nonpositive and the status is
    ``'not-applicable'``. With ``N <= 1`` the threshold has no finite
    form and the status is ``'condition-unverifiable'``, though the upper
    bound is still evaluated when its denominator is positive.
    """
    if not 0 < eps <= 1:
        raise InvalidParameterError("eps must lie in (0, 1]")
    if n_units < 1 or n_relays < 1:
        raise InvalidParameterError("need at least one unit and one relay")
    if not temperature > 0:
        raise InvalidParameterError("temperature must be positive")
    if n_states is None:
        n_states = (n_relays + 1) ** n_units
    rate = 1.0 / (n_units * n_relays)
    lower = math.log(1.0 / eps) / (2.0 * rate * n_states * n_relays)
    spread = u_max - u_min
    denom = n_units + 1.0 / n_relays - (n_units - 1) * math.exp(2.0 * spread / temperature)
    if denom <= 0:
        return MixingBounds(lower, math.inf, "not-applicable")
    log_num = -math.log(rate * n_relays) + (2.0 * u_max - u_min) / temperature
    log_n = math.log(math.log(n_units / eps)) if n_units / eps > 1 else -math.inf
    log_upper = log_num + log_n - math.log(denom)
    upper = math.exp(log_upper) if log_upper < 700 else math.inf
    if n_units <= 1:
        status = "condition-unverifiable"
    else:
        threshold = 2.0 * spread / math.log((n_units + 1.0 / n_relays) / (n_units - 1))
        status = "ok" if temperature >= threshold else "not-applicable"
    return MixingBounds(lower, upper, status)


def empirical_stationary_check(problem: Problem, temperature, steps: int, seed=0, burn_in=0.1, u=None) -> float:
    """TV distance between the chain's occupancy and the Gibbs vector.

    Runs the search kernel from the all-direct state for ``steps`` moves and
    discards the first ``burn_in`` fraction.
    """
    if u is None:
        u = state_values(problem)
    n_veh, n_units = problem.n_vehicles, problem.n_units
    n_burn = int(steps * burn_in)
    if steps - n_burn <= 0:
        raise EmptyResultError("no samples left after burn-in")
    rng = np.random.default_rng(seed)
    radix = n_veh ** np.arange(n_units, dtype=np.int64)
    rows = np.zeros(n_units, dtype=np.int64)
    code = 0
    counts = np.zeros(u.size, dtype=np.int64)
    cols = rng.integers(0, n_units, size=steps)
    shifts = rng.integers(1, n_veh, size=steps)
    log_r = np.log(rng.random(steps))
    for k in range(steps):
        j = cols[k]
        new = (rows[j] + shifts[k]) % n_veh
        cand = code + (new - rows[j]) * radix[j]
        if log_r[k] < min(0.0, (u[code] - u[cand]) / temperature):
            rows[j] = new
            code = cand
        if k >= n_burn:
            counts[code] += 1
    emp = counts / counts.sum()
    pi = np.exp(gibbs_log_probs(u, temperature))
    return float(0.5 * np.abs(emp - pi).sum())
