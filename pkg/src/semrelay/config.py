"""Experiment configuration in INI form.

Physical quantities given in dB are converted to linear units here, once.
Relative file paths resolve against the config file's directory first and
the bundled data directory second.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .channel import ChannelParams, LinkParams, db_to_linear, dbm_to_watts
from .errors import ConfigError, SemrelayError
from .optimizer import SearchConfig
from .scenario import RELAY, TARGET, RoadGeometry, VehicleState
from .semantics import bundled_path
from .strategy import ObjectiveWeights

PERTURBATIONS = ("none", "gaussian", "trace")


@dataclass(frozen=True)
class Perturbation:
    kind: str = "none"
    sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in PERTURBATIONS:
            raise ConfigError(f"unknown perturbation {self.kind!r}", "experiment.perturbation")
        if self.sigma < 0:
            raise ConfigError("must be >= 0", "experiment.speed_sigma_mps")


@dataclass(frozen=True)
class ExperimentConfig:
    geometry: RoadGeometry
    channel: ChannelParams
    weights: ObjectiveWeights
    search: SearchConfig
    t_max: float
    sr_path: Path
    vehicles: tuple = ()
    target: str = "v0"
    trace_path: Path | None = None
    perturbation: Perturbation = field(default_factory=Perturbation)
    extract: bool = False
    replay_step: float = 1e-3
    name: str = "experiment"
    source: Path | None = None

    @property
    def scenario_source(self) -> str:
        return "trace" if self.trace_path is not None else "inline"

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)


def _get(cp, section, key, conv=float, default=None, required=False):
    where = f"{section}.{key}"
    if not cp.has_section(section) or not cp.has_option(section, key) or cp.get(section, key).strip() == "":
        if required:
            raise ConfigError("required value missing", where)
        return default
    raw = cp.get(section, key).strip()
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"cannot parse {raw!r}: {exc}", where) from exc


def _bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def resolve_path(raw: str, base: Path | None) -> Path:
    p = Path(raw).expanduser()
    if p.is_absolute():
        return p
    if base is not None and (base / p).exists():
        return base / p
    bundled = bundled_path(raw)
    if bundled.exists():
        return bundled
    return (base / p) if base is not None else p


def _wrap(section, fn):
    """Re-raise module validation errors with the offending section."""
    try:
        return fn()
    except ConfigError:
        raise
    except SemrelayError as exc:
        raise ConfigError(str(exc), section) from exc


def _vehicles(cp, target_name) -> tuple:
    if not cp.has_section("vehicles"):
        return ()
    out = []
    for key, raw in cp.items("vehicles"):
        if key == "target":
            continue
        parts = [x.strip() for x in raw.split(",")]
        if len(parts) != 2:
            raise ConfigError("expected 'offset_m, speed_mps'", f"vehicles.{key}")
        try:
            offset, speed = float(parts[0]), float(parts[1])
        except ValueError as exc:
            raise ConfigError(f"cannot parse {raw!r}", f"vehicles.{key}") from exc
        role = TARGET if key == target_name else RELAY
        out.append(VehicleState(key, offset, speed, role))
    return tuple(out)


def parse_config(text: str, base: Path | None = None, source: Path | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {exc}") from exc

    geo = _wrap(
        "road",
        lambda: RoadGeometry(
            rsu_spacing=_get(cp, "road", "rsu_spacing_m", required=True),
            rsu_radius=_get(cp, "road", "rsu_radius_m", required=True),
            vehicle_radius=_get(cp, "road", "vehicle_radius_m", required=True),
        ),
    )

    bandwidth = _get(cp, "channel", "bandwidth_hz", default=1e6)

    def link(kind):
        return LinkParams(
            pathloss_exponent=_get(cp, "channel", f"pathloss_exponent_{kind}", required=True),
            reference_loss=_get(cp, "channel", f"reference_loss_{kind}", default=1.0),
            antenna_gain=_get(cp, "channel", f"antenna_gain_{kind}", default=1.0),
            snr_threshold=float(db_to_linear(_get(cp, "channel", f"snr_threshold_{kind}_db", required=True))),
            bandwidth=bandwidth,
        )

    noise_dbm_hz = _get(cp, "channel", "noise_dbm_per_hz", default=None)
    noise_w = _get(cp, "channel", "noise_power_w", default=None)
    if noise_w is None:
        if noise_dbm_hz is None:
            raise ConfigError("give noise_dbm_per_hz or noise_power_w", "channel.noise_dbm_per_hz")
        noise_w = float(dbm_to_watts(noise_dbm_hz + 10.0 * math.log10(bandwidth)))
    gbar = _get(cp, "channel", "mean_gain_linear", default=None)
    if gbar is None:
        gbar = float(db_to_linear(_get(cp, "channel", "mean_gain_db", default=1.0)))
    channel = _wrap(
        "channel",
        lambda: ChannelParams(
            v2i=link("v2i"),
            v2v=link("v2v"),
            noise_power=noise_w,
            fading_m=_get(cp, "channel", "fading_m", default=6.0),
            shadowing_ms=_get(cp, "channel", "shadowing_ms", default=6.0),
            mean_gain=gbar,
        ),
    )

    weights = _wrap(
        "objective",
        lambda: ObjectiveWeights(
            kappa_energy=_get(cp, "objective", "kappa_energy", default=0.5),
            kappa_reliability=_get(cp, "objective", "kappa_reliability", default=0.1),
            theta_direct=_get(cp, "objective", "theta_direct", default=1.5),
            theta_relay=_get(cp, "objective", "theta_relay", default=0.5),
            penalty=_get(cp, "objective", "penalty", default=None),
        ),
    )
    search = _wrap(
        "search",
        lambda: SearchConfig(
            temperature=_get(cp, "search", "temperature", default=None),
            iterations=_get(cp, "search", "iterations", int, default=10_000),
            seed=_get(cp, "search", "seed", int, default=0),
            init=_get(cp, "search", "init", str, default="baseline"),
            temperature_samples=_get(cp, "search", "temperature_samples", int, default=1000),
        ),
    )

    t_max = _get(cp, "experiment", "t_max_s", required=True)
    if not t_max > 0:
        raise ConfigError("must be positive", "experiment.t_max_s")
    sr_raw = _get(cp, "experiment", "sr", str, default="sr1.json")
    sr_path = resolve_path(sr_raw, base)
    if not sr_path.exists():
        raise ConfigError(f"file not found: {sr_raw}", "experiment.sr")
    trace_raw = _get(cp, "experiment", "trace", str, default=None)
    trace_path = None
    if trace_raw is not None:
        trace_path = resolve_path(trace_raw, base)
        if not trace_path.exists():
            raise ConfigError(f"file not found: {trace_raw}", "experiment.trace")
    pert = Perturbation(
        _get(cp, "experiment", "perturbation", str, default="none"),
        _get(cp, "experiment", "speed_sigma_mps", default=0.0),
    )
    step = _get(cp, "experiment", "replay_step_s", default=1e-3)
    if not step > 0:
        raise ConfigError("must be positive", "experiment.replay_step_s")
    latency = _get(cp, "experiment", "computing_latency_s", default=0.0)
    if latency != 0:
        raise ConfigError("only zero computing latency is supported", "experiment.computing_latency_s")

    target = _get(cp, "vehicles", "target", str, default="v0")
    vehicles = _wrap("vehicles", lambda: _vehicles(cp, target))
    if trace_path is None:
        if not vehicles:
            raise ConfigError("no vehicles listed and no trace given", "vehicles")
        if target not in [v.name for v in vehicles]:
            raise ConfigError(f"target {target!r} not among the listed vehicles", "vehicles.target")

    return ExperimentConfig(
        geometry=geo,
        channel=channel,
        weights=weights,
        search=search,
        t_max=t_max,
        sr_path=sr_path,
        vehicles=vehicles,
        target=target,
        trace_path=trace_path,
        perturbation=pert,
        extract=_get(cp, "experiment", "extract_from_pool", _bool, default=False),
        replay_step=step,
        name=_get(cp, "experiment", "name", str, default="experiment"),
        source=source,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, base=path.parent, source=path)


def bundled_config(name: str = "paper_table2.cfg") -> ExperimentConfig:
    return load_config(bundled_path(name))
