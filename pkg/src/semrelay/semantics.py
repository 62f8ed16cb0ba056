"""Semantic units, the weighted knowledge digraph and budgeted extraction.

A semantic unit (SU) is an indivisible payload with an importance
``alpha`` and a size ``beta`` in bits. Sizes are stored in bits; fixture
files list them in megabits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import EmptyResultError, InvalidParameterError, ShapeMismatchError, StateSpaceTooLargeError

MBIT = 1e6

_EXHAUSTIVE_MAX_UNITS = 22


@dataclass(frozen=True)
class SemanticUnit:
    id: str
    alpha: float
    beta: float
    label: str = ""

    def __post_init__(self):
        if not self.alpha >= 0:
            raise InvalidParameterError(f"SU {self.id}: alpha must be >= 0, got {self.alpha}")
        if not self.beta > 0:
            raise InvalidParameterError(f"SU {self.id}: beta must be > 0, got {self.beta}")


@dataclass(frozen=True)
class WeightedDigraph:
    """Knowledge digraph whose edges each carry one SU as payload.

    Edges are ``(head, tail, unit_id)`` triples. Units without an edge are
    allowed, which is how flat SU tables are represented.
    """

    units: tuple
    edges: tuple = ()

    def __post_init__(self):
        ids = [u.id for u in self.units]
        if len(set(ids)) != len(ids):
            raise InvalidParameterError("duplicate SU ids")
        known = set(ids)
        seen = set()
        for head, tail, uid in self.edges:
            if uid not in known:
                raise InvalidParameterError(f"edge ({head}, {tail}) carries unknown SU {uid!r}")
            if (head, tail) in seen:
                raise InvalidParameterError(f"duplicate edge ({head}, {tail})")
            seen.add((head, tail))

    def unit(self, uid) -> SemanticUnit:
        for u in self.units:
            if u.id == uid:
                return u
        raise KeyError(uid)

    @property
    def vertices(self) -> set:
        return {h for h, _, _ in self.edges} | {t for _, t, _ in self.edges}


@dataclass(frozen=True)
class SemanticRepresentation:
    """Ordered SU selection; column ``j`` of an assignment refers to ``units[j]``."""

    units: tuple
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if len(self.units) == 0:
            raise EmptyResultError("a semantic representation needs at least one SU")
        ids = [u.id for u in self.units]
        if len(set(ids)) != len(ids):
            raise InvalidParameterError("duplicate SU ids")

    @property
    def n(self) -> int:
        return len(self.units)

    @property
    def ids(self) -> list:
        return [u.id for u in self.units]

    @cached_property
    def alpha(self) -> np.ndarray:
        a = np.array([u.alpha for u in self.units], dtype=float)
        a.setflags(write=False)
        return a

    @cached_property
    def beta(self) -> np.ndarray:
        b = np.array([u.beta for u in self.units], dtype=float)
        b.setflags(write=False)
        return b

    @property
    def total_volume(self) -> float:
        return sr_volume(self)

    @property
    def total_accuracy(self) -> float:
        return sr_accuracy(self)

    def index(self, uid) -> int:
        return self.ids.index(uid)


def sr_volume(sr) -> float:
    """Total size in bits; 0 for ``None`` or an empty selection."""
    if sr is None or len(sr.units) == 0:
        return 0.0
    return float(sum(u.beta for u in sr.units))


def sr_accuracy(sr) -> float:
    if sr is None or len(sr.units) == 0:
        return 0.0
    return float(sum(u.alpha for u in sr.units))


def extract_sr(wdg: WeightedDigraph, budget: float) -> SemanticRepresentation:
    """Greedy selection by importance under a size budget in bits.

    Units are visited by descending alpha, ties by ascending size and then
    id. A unit that would overflow the budget is skipped and the scan goes
    on, so smaller units further down can still fit.
    """
    if not budget > 0:
        raise InvalidParameterError("budget must be positive")
    picked, used = [], 0.0
    for u in sorted(wdg.units, key=lambda u: (-u.alpha, u.beta, u.id)):
        if used + u.beta <= budget:
            picked.append(u)
            used += u.beta
    if not picked:
        raise EmptyResultError(f"no SU fits a budget of {budget:g} bits")
    return SemanticRepresentation(tuple(picked))


def knapsack_optimum(units, budget: float):
    """Exact maximum total alpha under the budget by full enumeration.

    Returns ``(best_alpha, mask)`` where ``mask`` is a boolean array over
    ``units``. Meant as an oracle for small pools.
    """
    n = len(units)
    if n > _EXHAUSTIVE_MAX_UNITS:
        raise StateSpaceTooLargeError(f"exhaustive knapsack over {n} units")
    alpha = np.array([u.alpha for u in units], dtype=float)
    beta = np.array([u.beta for u in units], dtype=float)
    codes = np.arange(1 << n, dtype=np.int64)
    bits = ((codes[:, None] >> np.arange(n)) & 1).astype(float)
    vol = bits @ beta
    acc = np.where(vol <= budget, bits @ alpha, -np.inf)
    k = int(np.argmax(acc))
    return float(acc[k]), bits[k].astype(bool)


def semantic_reliability(phi, sr: SemanticRepresentation, theta_direct: float, theta_relay: float) -> float:
    """Reliability score of an assignment.

    ``phi`` is a vehicle-by-unit 0/1 matrix with one 1 per column, row 0
    being the target's direct link.
    """
    if not theta_direct > theta_relay > 0:
        raise InvalidParameterError("need theta_direct > theta_relay > 0")
    phi = np.asarray(phi)
    if phi.ndim != 2 or phi.shape[1] != sr.n:
        raise ShapeMismatchError(f"assignment has shape {phi.shape}, SR has {sr.n} units")
    if not np.all(phi.sum(axis=0) == 1):
        raise ShapeMismatchError("every unit must be assigned exactly once")
    return float(reliability_from_mask(phi[0] == 1, sr.alpha, theta_direct, theta_relay))


def reliability_from_mask(direct, alpha, theta_direct: float, theta_relay: float):
    """Reliability for boolean direct-link masks of shape ``(..., N)``."""
    direct = np.asarray(direct, dtype=bool)
    on_direct = np.where(direct, alpha, 0.0).sum(axis=-1)
    relayed = np.where(direct, 0.0, alpha).sum(axis=-1)
    return theta_direct * on_direct + theta_relay * relayed


def semantic_energy_efficiency(accuracy: float, total_energy: float) -> float:
    """Delivered semantic accuracy per joule."""
    if not total_energy > 0:
        raise InvalidParameterError("total energy must be positive")
    return accuracy / total_energy


def _parse_units(doc) -> tuple:
    try:
        return tuple(
            SemanticUnit(str(u["id"]), float(u["alpha"]), float(u["beta_mbit"]) * MBIT, str(u.get("label", u["id"])))
            for u in doc["units"]
        )
    except (KeyError, TypeError) as exc:
        raise InvalidParameterError(f"malformed SU fixture: missing {exc}") from exc


def load_wdg(path) -> WeightedDigraph:
    doc = json.loads(Path(path).read_text())
    edges = tuple((str(h), str(t), str(u)) for h, t, u in doc.get("edges", []))
    return WeightedDigraph(_parse_units(doc), edges)


def load_sr(path) -> SemanticRepresentation:
    doc = json.loads(Path(path).read_text())
    return SemanticRepresentation(_parse_units(doc), name=doc.get("name", Path(path).stem))


def bundled_path(name: str) -> Path:
    """Path of a file shipped in the package's data directory."""
    return Path(resources.files("semrelay") / "data" / name)


def bundled_sr(name: str = "sr1") -> SemanticRepresentation:
    return load_sr(bundled_path(f"{name}.json"))


def dump_sr(sr: SemanticRepresentation, path) -> None:
    doc = {
        "name": sr.name,
        "units": [
            {"id": u.id, "label": u.label, "alpha": u.alpha, "beta_mbit": u.beta / MBIT} for u in sr.units
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
