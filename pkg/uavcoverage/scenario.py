"""
Model parameters in SI units and the configuration boundary.

Everything downstream reads parameters through the frozen dataclasses
defined here. Densities per km², powers in dBm and noise in dBm/Hz only ever
appear in configuration documents; ``parse_config`` converts them on the
way in and ``format_config`` on the way out.
"""

import logging
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Mapping, NamedTuple, Union

import tomli_w
from scipy.constants import speed_of_light

from uavcoverage.channel import MAX_SHAPE, LinkClass
from uavcoverage.errors import ConfigError
from uavcoverage.quadrature import Tolerance

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)

DEFAULT_CARRIER_HZ = 2e9


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts) + 30.0


def noise_power_watts(dbm_per_hz: float, bandwidth_hz: float) -> float:
    """Thermal noise over the full bandwidth, e.g. -174 dBm/Hz over 10 MHz."""
    return dbm_to_watts(dbm_per_hz + linear_to_db(bandwidth_hz))


def free_space_gain(carrier_hz: float = DEFAULT_CARRIER_HZ) -> float:
    """Free-space path gain at the 1 m reference distance, (c / (4 pi f))^2."""
    return (speed_of_light / (4.0 * math.pi * carrier_hz)) ** 2


def _require(condition: bool, key: str, message: str) -> None:
    if not condition:
        raise ConfigError(key, message)


@dataclass(frozen=True)
class Environment:
    a: float
    b: float
    eta_los: float
    eta_nlos: float
    alpha_los: float
    alpha_nlos: float
    m: int

    def __post_init__(self):
        _require(self.a > 0, "a", f"must be positive, got {self.a}")
        _require(self.b > 0, "b", f"must be positive, got {self.b}")
        _require(0 < self.eta_los <= 1, "eta_los", f"must lie in (0, 1], got {self.eta_los}")
        _require(
            0 < self.eta_nlos <= self.eta_los,
            "eta_nlos",
            f"must lie in (0, eta_los={self.eta_los}], got {self.eta_nlos}",
        )
        _require(self.alpha_los > 0, "alpha_los", f"must be positive, got {self.alpha_los}")
        _require(
            self.alpha_los < self.alpha_nlos,
            "alpha_nlos",
            f"must exceed alpha_los={self.alpha_los}, got {self.alpha_nlos}",
        )
        _require(
            int(self.m) == self.m and 1 <= self.m <= MAX_SHAPE,
            "m",
            f"must be an integer in [1, {MAX_SHAPE}], got {self.m}",
        )
        object.__setattr__(self, "m", int(self.m))

    def eta(self, link: LinkClass) -> float:
        return self.eta_los if link is LinkClass.LOS else self.eta_nlos

    def exponent(self, link: LinkClass) -> float:
        return self.alpha_los if link is LinkClass.LOS else self.alpha_nlos

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "Environment":
        try:
            base = ENVIRONMENT_PRESETS[name]
        except KeyError:
            raise ConfigError(
                "environment.preset", f"unknown preset {name!r}; choose from {sorted(ENVIRONMENT_PRESETS)}"
            )
        return cls(**{**asdict(base), **overrides})


@dataclass(frozen=True)
class Deployment:
    lambda_density: float  # per m²
    altitude: float  # m
    tx_power: float  # W
    noise_power: float  # W over the full bandwidth
    ref_gain: float = field(default_factory=free_space_gain)
    bandwidth: float = 10e6  # Hz

    def __post_init__(self):
        _require(self.lambda_density > 0, "lambda_density", f"must be positive, got {self.lambda_density}")
        _require(self.altitude > 0, "altitude", f"must be positive, got {self.altitude}")
        _require(self.tx_power > 0, "tx_power", f"must be positive, got {self.tx_power}")
        _require(self.noise_power >= 0, "noise_power", f"must be non-negative, got {self.noise_power}")
        _require(self.ref_gain > 0, "ref_gain", f"must be positive, got {self.ref_gain}")
        _require(self.bandwidth > 0, "bandwidth", f"must be positive, got {self.bandwidth}")

    @property
    def density_per_km2(self) -> float:
        return self.lambda_density * 1e6


@dataclass(frozen=True)
class NumericsConfig:
    r_max: float = 20_000.0
    quad_rel_tol: float = 1e-8
    quad_abs_tol: float = 1e-12
    quad_limit: int = 200
    y_max: float = 25.0
    support_tail: float = 1e-9
    trials: int = 10_000
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        _require(self.r_max > 0, "r_max", f"must be positive, got {self.r_max}")
        _require(0 < self.quad_rel_tol < 1, "quad_rel_tol", f"must lie in (0, 1), got {self.quad_rel_tol}")
        _require(0 < self.quad_abs_tol < 1, "quad_abs_tol", f"must lie in (0, 1), got {self.quad_abs_tol}")
        _require(self.quad_limit >= 10, "quad_limit", f"must be at least 10, got {self.quad_limit}")
        _require(self.y_max > 1, "y_max", f"must exceed 1 nat, got {self.y_max}")
        _require(0 < self.support_tail < 1, "support_tail", f"must lie in (0, 1), got {self.support_tail}")
        _require(self.trials >= 1, "trials", f"must be at least 1, got {self.trials}")
        _require(self.workers >= 1, "workers", f"must be at least 1, got {self.workers}")

    @property
    def tolerance(self) -> Tolerance:
        return Tolerance(rel=self.quad_rel_tol, abs=self.quad_abs_tol, limit=self.quad_limit)


class Scenario(NamedTuple):
    environment: Environment
    deployment: Deployment
    numerics: NumericsConfig


def _preset(a, b, eta_los_db, eta_nlos_db) -> Environment:
    return Environment(
        a=a, b=b, eta_los=db_to_linear(-eta_los_db), eta_nlos=db_to_linear(-eta_nlos_db),
        alpha_los=2.0, alpha_nlos=3.5, m=3,
    )


ENVIRONMENT_PRESETS: Dict[str, Environment] = {
    "suburban": _preset(4.88, 0.43, 0.1, 21.0),
    "urban": _preset(9.61, 0.16, 1.0, 20.0),
    "dense_urban": Environment(a=12.08, b=0.11, eta_los=0.69, eta_nlos=0.005, alpha_los=2.0, alpha_nlos=3.5, m=3),
    "highrise_urban": _preset(27.23, 0.08, 2.3, 34.0),
}


def derived_zeta(env: Environment, dep: Deployment, link: LinkClass) -> float:
    """Received power at the 1 m reference, P_t * eta_link * K (watts)."""
    return dep.tx_power * env.eta(link) * dep.ref_gain


def check_scenario(env: Environment, dep: Deployment, num: NumericsConfig) -> Scenario:
    """Cross-type invariants; returns the bundled scenario."""
    _require(
        num.r_max > 10.0 * dep.altitude,
        "numerics.r_max_m",
        f"must exceed 10 x altitude = {10.0 * dep.altitude:g} m, got {num.r_max:g}",
    )
    return Scenario(env, dep, num)


def default_scenario(density_per_km2: float = 5.0, altitude: float = 100.0) -> Scenario:
    """Dense-urban deployment: 30 dBm, -174 dBm/Hz over 10 MHz, 2 GHz carrier."""
    dep = Deployment(
        lambda_density=density_per_km2 * 1e-6,
        altitude=altitude,
        tx_power=dbm_to_watts(30.0),
        noise_power=noise_power_watts(-174.0, 10e6),
        ref_gain=free_space_gain(DEFAULT_CARRIER_HZ),
        bandwidth=10e6,
    )
    return check_scenario(ENVIRONMENT_PRESETS["dense_urban"], dep, NumericsConfig())


ENVIRONMENT_KEYS = ("a", "b", "eta_los", "eta_nlos", "alpha_los", "alpha_nlos", "m")
DEPLOYMENT_KEYS = ("density_per_km2", "altitude_m", "tx_power_dbm", "noise_dbm_per_hz", "bandwidth_hz")
DEPLOYMENT_OPTIONAL_KEYS = ("carrier_hz", "ref_gain")
NUMERICS_KEYS = {
    "r_max_m": "r_max",
    "quad_rel_tol": "quad_rel_tol",
    "quad_abs_tol": "quad_abs_tol",
    "quad_limit": "quad_limit",
    "y_max": "y_max",
    "support_tail": "support_tail",
    "trials": "trials",
    "seed": "seed",
    "workers": "workers",
}
INTEGER_FIELDS = {"m", "quad_limit", "trials", "seed", "workers"}

# dataclass field -> configuration key, for invariant errors
_DEPLOYMENT_FIELD_KEYS = {
    "lambda_density": "deployment.density_per_km2",
    "altitude": "deployment.altitude_m",
    "tx_power": "deployment.tx_power_dbm",
    "noise_power": "deployment.noise_dbm_per_hz",
    "ref_gain": "deployment.ref_gain",
    "bandwidth": "deployment.bandwidth_hz",
}


def _number(
    table: Mapping[str, Any], section: str, key: str, integer: bool = False, allow_neg_inf: bool = False
) -> Union[int, float]:
    dotted = f"{section}.{key}"
    if key not in table:
        raise ConfigError(dotted, "missing required key")
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(dotted, f"expected a number, got {value!r}")
    if allow_neg_inf and value == -math.inf:
        return value
    if not math.isfinite(value):
        raise ConfigError(dotted, f"expected a finite number, got {value!r}")
    if integer:
        if int(value) != value:
            raise ConfigError(dotted, f"expected an integer, got {value!r}")
        return int(value)
    return float(value)


def _reject_unknown(table: Mapping[str, Any], section: str, allowed) -> None:
    for key in table:
        if key not in allowed:
            raise ConfigError(f"{section}.{key}", "unknown key")


def _table(doc: Mapping[str, Any], section: str) -> Mapping[str, Any]:
    table = doc.get(section, {})
    if not isinstance(table, dict):
        raise ConfigError(section, "expected a table")
    return table


def _parse_environment(table: Mapping[str, Any]) -> Environment:
    _reject_unknown(table, "environment", set(ENVIRONMENT_KEYS) | {"preset"})
    values: Dict[str, Any] = {}
    preset = table.get("preset")
    if preset is not None:
        if preset not in ENVIRONMENT_PRESETS:
            raise ConfigError(
                "environment.preset", f"unknown preset {preset!r}; choose from {sorted(ENVIRONMENT_PRESETS)}"
            )
        values.update(asdict(ENVIRONMENT_PRESETS[preset]))
    for key in ENVIRONMENT_KEYS:
        if key in table or key not in values:
            values[key] = _number(table, "environment", key, integer=key in INTEGER_FIELDS)
    try:
        return Environment(**values)
    except ConfigError as e:
        raise ConfigError(f"environment.{e.key}", e.message) from None


def _parse_deployment(table: Mapping[str, Any]) -> Deployment:
    _reject_unknown(table, "deployment", set(DEPLOYMENT_KEYS) | set(DEPLOYMENT_OPTIONAL_KEYS))
    # noise_dbm_per_hz = -inf selects a noiseless (interference-limited) run
    raw = {key: _number(table, "deployment", key, allow_neg_inf=key == "noise_dbm_per_hz") for key in DEPLOYMENT_KEYS}
    if "ref_gain" in table:
        ref_gain = _number(table, "deployment", "ref_gain")
    else:
        carrier = _number(table, "deployment", "carrier_hz") if "carrier_hz" in table else DEFAULT_CARRIER_HZ
        if carrier <= 0:
            raise ConfigError("deployment.carrier_hz", f"must be positive, got {carrier}")
        ref_gain = free_space_gain(carrier)
    if raw["bandwidth_hz"] <= 0:
        raise ConfigError("deployment.bandwidth_hz", f"must be positive, got {raw['bandwidth_hz']}")
    try:
        return Deployment(
            lambda_density=raw["density_per_km2"] * 1e-6,
            altitude=raw["altitude_m"],
            tx_power=dbm_to_watts(raw["tx_power_dbm"]),
            noise_power=noise_power_watts(raw["noise_dbm_per_hz"], raw["bandwidth_hz"]),
            ref_gain=ref_gain,
            bandwidth=raw["bandwidth_hz"],
        )
    except ConfigError as e:
        raise ConfigError(_DEPLOYMENT_FIELD_KEYS.get(e.key, f"deployment.{e.key}"), e.message) from None


def _parse_numerics(table: Mapping[str, Any]) -> NumericsConfig:
    _reject_unknown(table, "numerics", NUMERICS_KEYS)
    values = {
        attr: _number(table, "numerics", key, integer=attr in INTEGER_FIELDS)
        for key, attr in NUMERICS_KEYS.items()
        if key in table
    }
    try:
        return NumericsConfig(**values)
    except ConfigError as e:
        key = next(k for k, attr in NUMERICS_KEYS.items() if attr == e.key)
        raise ConfigError(f"numerics.{key}", e.message) from None


def parse_config(text: str) -> Scenario:
    """
    Parse a TOML scenario document into SI-unit parameter objects.

    Required: every ``environment`` key (or a ``preset``) and every
    ``deployment`` key; ``numerics`` keys default to NumericsConfig's
    defaults. Missing keys, non-numeric values and invariant violations raise
    ConfigError naming the offending key.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError("<document>", f"not valid TOML: {e}") from None
    _reject_unknown(doc, "<document>", {"environment", "deployment", "numerics"})
    env = _parse_environment(_table(doc, "environment"))
    dep = _parse_deployment(_table(doc, "deployment"))
    num = _parse_numerics(_table(doc, "numerics"))
    return check_scenario(env, dep, num)


def load_config(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    scenario = parse_config(path.read_text(encoding="utf-8"))
    env, dep, num = scenario
    logger.info(
        f"Loaded {path.name}: lambda={dep.density_per_km2:g}/km², h={dep.altitude:g} m, "
        f"m={env.m}, r_max={num.r_max:g} m, trials={num.trials}"
    )
    return scenario


def format_config(scenario: Scenario) -> str:
    """TOML document that parses back to the same SI values."""
    env, dep, num = scenario
    doc = {
        "environment": {key: getattr(env, key) for key in ENVIRONMENT_KEYS},
        "deployment": {
            "density_per_km2": dep.density_per_km2,
            "altitude_m": dep.altitude,
            "tx_power_dbm": watts_to_dbm(dep.tx_power),
            "noise_dbm_per_hz": (
                watts_to_dbm(dep.noise_power) - linear_to_db(dep.bandwidth) if dep.noise_power > 0 else -math.inf
            ),
            "bandwidth_hz": dep.bandwidth,
            "ref_gain": dep.ref_gain,
        },
        "numerics": {key: getattr(num, attr) for key, attr in NUMERICS_KEYS.items()},
    }
    return tomli_w.dumps(doc)


def scenario_summary(scenario: Scenario) -> Dict[str, float]:
    """Flat SI view of a scenario, used for report headers."""
    env, dep, num = scenario
    out: Dict[str, float] = {}
    for obj in (env, dep, num):
        out.update({f.name: getattr(obj, f.name) for f in fields(obj)})
    return out
