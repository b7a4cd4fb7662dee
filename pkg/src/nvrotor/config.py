"""System configuration: physical inputs, unit handling, validation.

All dimensional quantities are stored internally in SI, with every
frequency-like quantity held as an *angular* frequency (rad/s).  Input
files tag each dimensional value with an explicit unit key so that no
silent factor-2*pi can creep in; cyclic-frequency tags (Hz, MHz, ...)
are multiplied by 2*pi on ingest.

The optical-pumping rate and the coherence-decay rate are special: the
literature quotes them in a notation that can be read either as a cyclic
frequency or as a plain inverse time.  The top-level boolean
``rates_are_angular`` selects the reading for those two entries when
they carry a cyclic tag: ``true`` multiplies by 2*pi like any other
frequency, ``false`` takes the metric value as an inverse time in rad/s
(e.g. "0.4 MHz" -> 0.4e6 1/s).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

TWO_PI = 2.0 * math.pi

# unit tag -> factor to SI (angular rad/s for frequency-like tags)
_FREQ_UNITS = {
    "rad_per_s": 1.0,
    "Hz": TWO_PI,
    "kHz": TWO_PI * 1e3,
    "MHz": TWO_PI * 1e6,
    "GHz": TWO_PI * 1e9,
}
# inverse-time reading of the same metric prefixes (no 2*pi)
_RATE_DIRECT_UNITS = {
    "rad_per_s": 1.0,
    "Hz": 1.0,
    "kHz": 1e3,
    "MHz": 1e6,
    "GHz": 1e9,
}
_LENGTH_UNITS = {"m": 1.0, "um": 1e-6, "nm": 1e-9}
_AREA_UNITS = {"m2": 1.0, "um2": 1e-12}
_POWER_UNITS = {"W": 1.0, "mW": 1e-3}
_DENSITY_UNITS = {"kg_per_m3": 1.0, "g_per_cm3": 1e3}
_ANGLE_UNITS = {"rad": 1.0, "deg": math.pi / 180.0}
_TEMPERATURE_UNITS = {"K": 1.0}

_UNIT_TABLES = {
    "frequency": _FREQ_UNITS,
    "length": _LENGTH_UNITS,
    "area": _AREA_UNITS,
    "power": _POWER_UNITS,
    "density": _DENSITY_UNITS,
    "angle": _ANGLE_UNITS,
    "temperature": _TEMPERATURE_UNITS,
}

# field name -> dimension kind (None: plain number/bool)
_FIELD_KINDS = {
    "semi_major_a": "length",
    "semi_minor_b": "length",
    "mass_density": "density",
    "dielectric_const": None,
    "laser_power": "power",
    "beam_area": "area",
    "zero_field_splitting_D": "frequency",
    "microwave_freq_omega": "frequency",
    "zeeman_B0": "frequency",
    "zeeman_B1": "frequency",
    "pump_rate_Gamma": "rate",
    "dephase_rate_Gamma1": "rate",
    "crossing_angle_beta0": "angle",
    "nv_count_n": None,
    "bath_temperature_T": "temperature",
    "rates_are_angular": None,
}

# simulation-control keys accepted under the "sim" namespace in config
# files and in --set overrides; they never affect physics derivations.
_SIM_KEYS = {
    "ensemble_n_traj": int,
    "ensemble_relax_times": float,
    "ensemble_burn_relax_times": float,
    "ensemble_dt_factor": float,
    "cool_kappa_beta_h": float,
    "cool_n_periods": float,
    "rtol": float,
}


class ConfigError(ValueError):
    """Raised for malformed, inconsistent, or out-of-range configuration."""


def _convert(name, entry, rates_are_angular):
    kind = _FIELD_KINDS[name]
    if kind is None:
        return entry
    if not isinstance(entry, dict) or "value" not in entry or "unit" not in entry:
        raise ConfigError(
            f"{name}: dimensional quantities need explicit {{'value':..,'unit':..}} tags"
        )
    value, unit = entry["value"], entry["unit"]
    if kind == "rate":
        table = _FREQ_UNITS if rates_are_angular else _RATE_DIRECT_UNITS
    else:
        table = _UNIT_TABLES[kind]
    if unit not in table:
        raise ConfigError(f"{name}: unknown unit tag {unit!r} (allowed: {sorted(table)})")
    return float(value) * table[unit]


@dataclass(frozen=True)
class SystemConfig:
    """All physical inputs in SI; frequencies/rates in angular rad/s.

    Exactly one of ``microwave_freq_omega`` / ``crossing_angle_beta0`` is
    authoritative.  When omega is not given it is derived from the
    zero-crossing construction of the level detuning at alpha=0,
    beta=beta0; when omega is given explicitly, beta0 is derived (and may
    not exist, in which case the configuration is flagged no-cooling).
    """

    semi_major_a: float          # m
    semi_minor_b: float          # m
    mass_density: float          # kg/m^3
    dielectric_const: float      # relative
    laser_power: float           # W
    beam_area: float             # m^2 (pi * waist^2)
    zero_field_splitting_D: float   # rad/s
    zeeman_B0: float             # rad/s (gamma*B0)
    zeeman_B1: float             # rad/s (gamma*B1)
    pump_rate_Gamma: float       # rad/s
    dephase_rate_Gamma1: float   # rad/s
    bath_temperature_T: float    # K
    nv_count_n: int = 1
    crossing_angle_beta0: float | None = None  # rad; None if omega explicit
    microwave_freq_omega: float | None = None  # rad/s; None -> derived
    rates_are_angular: bool = True
    sim: dict = field(default_factory=dict)

    def __post_init__(self):
        a, b = self.semi_major_a, self.semi_minor_b
        if not (0 < b <= a):
            raise ConfigError("require 0 < semi_minor_b <= semi_major_a (prolate/spherical only)")
        if self.dielectric_const <= 1:
            raise ConfigError("dielectric_const must exceed 1")
        for name in ("zeeman_B0", "zeeman_B1", "pump_rate_Gamma", "dephase_rate_Gamma1"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.laser_power <= 0 or self.beam_area <= 0:
            raise ConfigError("laser_power and beam_area must be positive")
        if self.nv_count_n < 1 or int(self.nv_count_n) != self.nv_count_n:
            raise ConfigError("nv_count_n must be a positive integer")
        if self.bath_temperature_T <= 0:
            raise ConfigError("bath_temperature_T must be positive")
        if (self.crossing_angle_beta0 is None) == (self.microwave_freq_omega is None):
            raise ConfigError(
                "exactly one of microwave_freq_omega / crossing_angle_beta0 must be given"
            )
        if self.crossing_angle_beta0 is not None and not (
            0 < self.crossing_angle_beta0 < math.pi / 4
        ):
            raise ConfigError("crossing_angle_beta0 must lie in (0, pi/4)")
        for key in self.sim:
            if key not in _SIM_KEYS:
                raise ConfigError(f"unknown sim key {key!r}")

    # -- derived frequency bookkeeping -------------------------------

    @property
    def microwave_omega(self) -> float:
        """Drive frequency in rad/s (given, or fixed by the crossing angle)."""
        if self.microwave_freq_omega is not None:
            return self.microwave_freq_omega
        b0 = self.crossing_angle_beta0
        return self.zero_field_splitting_D - self.zeeman_B0 * math.cos(math.pi / 4 - b0)

    @property
    def detuning_offset(self) -> float:
        """D - omega in rad/s."""
        return self.zero_field_splitting_D - self.microwave_omega

    @property
    def derived_crossing_angle(self) -> float | None:
        """Angle where the lower detuning branch crosses zero, if any."""
        if self.crossing_angle_beta0 is not None:
            return self.crossing_angle_beta0
        if self.zeeman_B0 == 0:
            return None
        x = self.detuning_offset / self.zeeman_B0
        if not (math.cos(math.pi / 4) <= x <= 1.0):
            return None
        return math.pi / 4 - math.acos(x)

    @property
    def no_cooling(self) -> bool:
        """True for degenerate inputs that produce no friction mechanism."""
        return (
            self.semi_major_a == self.semi_minor_b
            or self.zeeman_B0 == 0.0
            or self.derived_crossing_angle is None
        )

    def with_updates(self, **kwargs) -> "SystemConfig":
        return replace(self, **kwargs)

    # -- serialization -----------------------------------------------

    def resolved_dict(self) -> dict:
        d = {
            "semi_major_a": self.semi_major_a,
            "semi_minor_b": self.semi_minor_b,
            "mass_density": self.mass_density,
            "dielectric_const": self.dielectric_const,
            "laser_power": self.laser_power,
            "beam_area": self.beam_area,
            "zero_field_splitting_D": self.zero_field_splitting_D,
            "microwave_freq_omega": self.microwave_omega,
            "zeeman_B0": self.zeeman_B0,
            "zeeman_B1": self.zeeman_B1,
            "pump_rate_Gamma": self.pump_rate_Gamma,
            "dephase_rate_Gamma1": self.dephase_rate_Gamma1,
            "crossing_angle_beta0": self.derived_crossing_angle,
            "nv_count_n": int(self.nv_count_n),
            "bath_temperature_T": self.bath_temperature_T,
            "rates_are_angular": bool(self.rates_are_angular),
            "sim": dict(sorted(self.sim.items())),
        }
        return d

    def fingerprint(self) -> str:
        """Stable hash of the fully resolved configuration."""
        blob = json.dumps(self.resolved_dict(), sort_keys=True,
                          separators=(",", ":"), default=_num17)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _num17(x):
    if isinstance(x, float):
        return f"{x:.17g}"
    raise TypeError(type(x))


def load_config(path) -> SystemConfig:
    """Load a unit-tagged JSON configuration file."""
    with open(path) as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> SystemConfig:
    unknown = set(raw) - set(_FIELD_KINDS) - {"sim"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    rates_are_angular = bool(raw.get("rates_are_angular", True))
    kwargs = {"rates_are_angular": rates_are_angular}
    for name in _FIELD_KINDS:
        if name == "rates_are_angular" or name not in raw:
            continue
        kwargs[name] = _convert(name, raw[name], rates_are_angular)
    if "nv_count_n" in kwargs:
        kwargs["nv_count_n"] = int(kwargs["nv_count_n"])
    sim = raw.get("sim", {})
    if not isinstance(sim, dict):
        raise ConfigError("sim must be an object")
    parsed_sim = {}
    for key, val in sim.items():
        if key not in _SIM_KEYS:
            raise ConfigError(f"unknown sim key {key!r}")
        parsed_sim[key] = _SIM_KEYS[key](val)
    kwargs["sim"] = parsed_sim
    try:
        return SystemConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"incomplete configuration: {exc}") from exc


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Apply CLI ``key=value`` overrides to a raw (pre-parse) config dict.

    For unit-tagged entries only the numeric value is replaced; the unit
    tag declared in the file is kept.  ``sim.<key>`` addresses the
    simulation-control namespace.
    """
    out = json.loads(json.dumps(raw))  # deep copy
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, _, text = item.partition("=")
        key = key.strip()
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        if key.startswith("sim."):
            sub = key[4:]
            if sub not in _SIM_KEYS:
                raise ConfigError(f"unknown sim key {sub!r}")
            out.setdefault("sim", {})[sub] = value
            continue
        if key not in _FIELD_KINDS:
            raise ConfigError(f"override references unknown config key {key!r}")
        if _FIELD_KINDS[key] is None:
            out[key] = value
        else:
            if key in out and isinstance(out[key], dict):
                out[key]["value"] = value
            else:
                raise ConfigError(
                    f"cannot override {key!r}: no unit-tagged entry in the base config"
                )
    return out


def reference_config(rates_are_angular: bool = True, **updates) -> SystemConfig:
    """The nanodiamond / field configuration used for all headline numbers."""
    cfg = SystemConfig(
        semi_major_a=40e-9,
        semi_minor_b=20e-9,
        mass_density=3500.0,
        dielectric_const=5.7,
        laser_power=0.1,
        beam_area=2e-12,
        zero_field_splitting_D=TWO_PI * 2.87e9,
        zeeman_B0=TWO_PI * 100e6,
        zeeman_B1=TWO_PI * 1e6,
        pump_rate_Gamma=(TWO_PI * 0.4e6 if rates_are_angular else 0.4e6),
        dephase_rate_Gamma1=(TWO_PI * 5e6 if rates_are_angular else 5e6),
        crossing_angle_beta0=math.radians(9.0),
        nv_count_n=1,
        bath_temperature_T=5.0,
        rates_are_angular=rates_are_angular,
    )
    if updates:
        cfg = cfg.with_updates(**updates)
    return cfg
