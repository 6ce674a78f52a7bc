"""YAML run configuration with units spelled out in the key names.

Example::

    preset: C                 # optional template; keys below override it
    total_distance_km: 100
    eta_m: 1.0
    tau_m_ms: inf
    seed: 7
    trials: 200000
    engine: both

Physical keys accept several units and are converted to SI here, once:

==================  ==========================================
quantity            accepted keys
==================  ==========================================
total distance      total_distance_m, total_distance_km
memory lifetime     tau_m_s, tau_m_ms, tau_m_us (``inf`` ok)
attenuation length  l_att_m, l_att_km
fiber light speed   c_fiber_m_per_s, c_fiber_km_per_s
==================  ==========================================

``scheme``, ``eta_s``, ``eta_d``, ``eta_m``, ``gamma`` and ``num_links`` are
dimensionless.  Errors name the offending key.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from ..model import PRESETS, ParameterError, Scheme, SchemeParams, load_preset

log = logging.getLogger(__name__)

ENGINES = ("analytic", "mc", "both")

# key -> (SI field, factor)
UNIT_KEYS: dict[str, tuple[str, float]] = {
    "total_distance_m": ("total_distance_m", 1.0),
    "total_distance_km": ("total_distance_m", 1e3),
    "tau_m_s": ("tau_m_s", 1.0),
    "tau_m_ms": ("tau_m_s", 1e-3),
    "tau_m_us": ("tau_m_s", 1e-6),
    "l_att_m": ("l_att_m", 1.0),
    "l_att_km": ("l_att_m", 1e3),
    "c_fiber_m_per_s": ("c_fiber_m_per_s", 1.0),
    "c_fiber_km_per_s": ("c_fiber_m_per_s", 1e3),
}
PLAIN_KEYS = ("scheme", "eta_s", "eta_d", "eta_m", "gamma", "num_links")
RUN_KEYS = ("preset", "seed", "trials", "engine", "workers", "max_attempts", "postselect", "sweep")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the key at fault."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def to_number(key: str, value: Any) -> float:
    if isinstance(value, bool):
        raise ConfigError(key, f"expected a number, got {value!r}")
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity", "+inf"):
        return math.inf
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected a number, got {value!r}") from None
    if math.isnan(out):
        raise ConfigError(key, "NaN is not a valid value")
    return out


def si_name(key: str) -> tuple[str, float]:
    """SI field name and conversion factor for a (possibly unit-suffixed) key."""
    if key in UNIT_KEYS:
        return UNIT_KEYS[key]
    if key in PLAIN_KEYS:
        return key, 1.0
    raise ConfigError(key, "unknown parameter")


def physical_overrides(data: Mapping[str, Any]) -> dict[str, Any]:
    """SI-valued SchemeParams fields from the physical keys of ``data``."""
    out: dict[str, Any] = {}
    seen: dict[str, str] = {}
    for key, value in data.items():
        if key in RUN_KEYS:
            continue
        name, factor = si_name(key)
        if name in seen:
            raise ConfigError(key, f"conflicts with {seen[name]!r} (same quantity given twice)")
        seen[name] = key
        if name == "scheme":
            try:
                out[name] = Scheme.parse(value).value
            except ParameterError as exc:
                raise ConfigError(key, str(exc).split(": ", 1)[-1]) from None
        elif name == "num_links":
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(key, f"expected an integer, got {value!r}")
            out[name] = value
        elif name == "gamma" and value is None:
            out[name] = None
        else:
            out[name] = to_number(key, value) * factor
    return out


def build_params(data: Mapping[str, Any], base: SchemeParams | None = None,
                 preset: str | None = None) -> SchemeParams:
    """Resolve a mapping (optionally over a preset or base params) into SchemeParams.

    ``gamma`` only matters for the "1+1" scheme; elsewhere it is dropped with
    a warning.
    """
    overrides = physical_overrides(data)
    preset = preset if preset is not None else data.get("preset")
    if base is not None:
        merged = base.to_dict()
    elif preset is not None:
        try:
            merged = load_preset(str(preset)).to_dict()
        except KeyError as exc:
            raise ConfigError("preset", exc.args[0]) from None
    else:
        merged = {}
    merged.update(overrides)
    scheme = merged.get("scheme")
    if scheme is not None and Scheme.parse(scheme) is not Scheme.SPS_1BSM and merged.get("gamma") is not None:
        if "gamma" in overrides:
            log.warning("gamma is only used by the '1+1' scheme; ignoring gamma=%r for %r", merged["gamma"], scheme)
        merged["gamma"] = None
    missing = [k for k in ("scheme", "total_distance_m", "eta_s", "eta_d", "eta_m") if k not in merged]
    if missing:
        raise ConfigError(missing[0], "required parameter is missing (give it directly or via a preset)")
    try:
        return SchemeParams.from_dict(merged)
    except ParameterError as exc:
        raise ConfigError(exc.field, str(exc).split(": ", 1)[-1]) from None


@dataclass
class RunConfig:
    """Parsed config file: physical keys plus run options."""

    physical: dict[str, Any] = field(default_factory=dict)
    preset: str | None = None
    seed: int | None = None
    trials: int | None = None
    engine: str | None = None
    workers: int | None = None
    max_attempts: int | None = None
    postselect: bool | None = None
    sweep: dict[str, Any] = field(default_factory=dict)


def _int_option(data: Mapping[str, Any], key: str, minimum: int) -> int | None:
    value = data.get(key)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(key, f"expected an integer >= {minimum}, got {value!r}")
    return value


def parse_config(data: Any) -> RunConfig:
    if data is None:
        data = {}
    if not isinstance(data, Mapping):
        raise ConfigError("<root>", "config must be a mapping of keys to values")
    for key in data:
        if key not in RUN_KEYS:
            si_name(key)  # raises on unknown keys
    preset = data.get("preset")
    if preset is not None and str(preset).strip().upper() not in PRESETS and str(preset) not in PRESETS:
        raise ConfigError("preset", f"unknown preset {preset!r}; available: {', '.join(sorted(PRESETS))}")
    engine = data.get("engine")
    if engine is not None and engine not in ENGINES:
        raise ConfigError("engine", f"expected one of {ENGINES}, got {engine!r}")
    postselect = data.get("postselect")
    if postselect is not None and not isinstance(postselect, bool):
        raise ConfigError("postselect", f"expected true or false, got {postselect!r}")
    sweep = data.get("sweep") or {}
    if not isinstance(sweep, Mapping):
        raise ConfigError("sweep", "expected a mapping")
    cfg = RunConfig(
        physical={k: v for k, v in data.items() if k not in RUN_KEYS},
        preset=str(preset) if preset is not None else None,
        seed=_int_option(data, "seed", 0),
        trials=_int_option(data, "trials", 1),
        engine=engine,
        workers=_int_option(data, "workers", 1),
        max_attempts=_int_option(data, "max_attempts", 1),
        postselect=postselect,
        sweep=dict(sweep),
    )
    if cfg.seed is not None and cfg.seed >= 2**64:
        raise ConfigError("seed", "must fit in an unsigned 64-bit integer")
    physical_overrides(cfg.physical)  # validate units and types early
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("--config", f"{path} is not valid YAML: {exc}") from None
    return parse_config(data)
