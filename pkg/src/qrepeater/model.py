"""Domain types shared by the analytic and Monte Carlo engines.

All quantities are strict SI internally: meters, seconds, Hz.  Conversion
from km/ms happens only in the config layer (``qrepeater.workbench.config``).

The memory decay ratio ``r`` is ``T0 / tau_m``: the fraction of a memory
lifetime consumed by one generation attempt.  This is inferred from the
attempt-time convention (``alpha0 * exp(-n_dif * T0 / tau_m)``); the source
model never names it explicitly.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

__all__ = [
    "Scheme",
    "SchemeParams",
    "ParameterError",
    "LinkGeometry",
    "derive_link_geometry",
    "HardwarePreset",
    "PRESETS",
    "load_preset",
    "register_preset",
    "MemoryKind",
    "MemoryModel",
    "DEFAULT_L_ATT_M",
    "DEFAULT_C_FIBER",
]

DEFAULT_L_ATT_M = 22_000.0
DEFAULT_C_FIBER = 2.0e8
ALLOWED_NUM_LINKS = (2, 4)
LINKS_PER_CHAIN = 2


class ParameterError(ValueError):
    """Invalid physical parameter.  ``field`` names the offending input."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class Scheme(enum.Enum):
    """Repeater scheme, written ``source + BSM``."""

    SPS_1BSM = "1+1"
    DPPS_2BSM = "2+2"
    NDPPS_1BSM = "2~+1"
    NDPPS_2BSM = "2~+2"

    @property
    def bsm_photons(self) -> int:
        return 1 if self in (Scheme.SPS_1BSM, Scheme.NDPPS_1BSM) else 2

    @property
    def single_photon_bsm(self) -> bool:
        return self.bsm_photons == 1

    @property
    def source(self) -> str:
        return {
            Scheme.SPS_1BSM: "SPS",
            Scheme.DPPS_2BSM: "dPPS",
            Scheme.NDPPS_1BSM: "ndPPS",
            Scheme.NDPPS_2BSM: "ndPPS",
        }[self]

    @property
    def label(self) -> str:
        return self.value.replace("2~", "2̃")

    @classmethod
    def parse(cls, text: "str | Scheme") -> "Scheme":
        if isinstance(text, Scheme):
            return text
        key = str(text).strip().replace(" ", "")
        # combining tilde, "2t+1" and plain "~2+1" spellings all map to 2~
        key = key.replace("2̃", "2~").replace("~2", "2~").replace("2t", "2~")
        for member in cls:
            if key == member.value or key.upper() == member.name:
                return member
        names = ", ".join(m.value for m in cls)
        raise ParameterError("scheme", f"unknown scheme {text!r} (expected one of {names})")


def _check_unit_interval(name: str, value: float, *, closed_low: bool = False) -> None:
    if not isinstance(value, (int, float)) or math.isnan(value):
        raise ParameterError(name, f"must be a number, got {value!r}")
    low_ok = value >= 0.0 if closed_low else value > 0.0
    if not (low_ok and value <= 1.0):
        bracket = "[0, 1]" if closed_low else "(0, 1]"
        raise ParameterError(name, f"must lie in {bracket}, got {value!r}")


@dataclass(frozen=True)
class SchemeParams:
    """Scheme identity plus every physical input needed by both engines.

    ``num_links`` is 2 for a single two-link chain, or 4 for the postselected
    arrangement (two parallel two-link chains sharing end nodes).  In both
    cases each chain spans the whole distance, so the elementary link length
    is ``total_distance_m / 2``.
    """

    scheme: Scheme
    total_distance_m: float
    eta_s: float
    eta_d: float
    eta_m: float
    tau_m_s: float = math.inf
    gamma: float | None = None
    num_links: int = 2
    l_att_m: float = DEFAULT_L_ATT_M
    c_fiber_m_per_s: float = DEFAULT_C_FIBER

    def __post_init__(self) -> None:
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        if not self.total_distance_m > 0 or math.isinf(self.total_distance_m):
            raise ParameterError("total_distance_m", f"must be positive and finite, got {self.total_distance_m!r}")
        if self.num_links not in ALLOWED_NUM_LINKS:
            raise ParameterError("num_links", f"must be one of {ALLOWED_NUM_LINKS}, got {self.num_links!r}")
        for name in ("eta_s", "eta_d", "eta_m"):
            _check_unit_interval(name, getattr(self, name))
        if not self.tau_m_s > 0:
            raise ParameterError("tau_m_s", f"must be > 0 (may be inf), got {self.tau_m_s!r}")
        if not self.l_att_m > 0:
            raise ParameterError("l_att_m", f"must be > 0, got {self.l_att_m!r}")
        if not (self.c_fiber_m_per_s > 0 and math.isfinite(self.c_fiber_m_per_s)):
            raise ParameterError("c_fiber_m_per_s", f"must be positive and finite, got {self.c_fiber_m_per_s!r}")
        if self.scheme is Scheme.SPS_1BSM:
            if self.gamma is None or not (0.0 < self.gamma < 1.0):
                raise ParameterError("gamma", f"'1+1' needs a beam-splitter transmission in (0, 1), got {self.gamma!r}")

    # derived geometry, read-only
    @property
    def l0_m(self) -> float:
        return self.total_distance_m / LINKS_PER_CHAIN

    @property
    def t0_s(self) -> float:
        return self.l0_m / self.c_fiber_m_per_s

    @property
    def r(self) -> float:
        return self.t0_s / self.tau_m_s

    @property
    def eta_t(self) -> float:
        return math.exp(-self.l0_m / self.l_att_m)

    @property
    def postselected(self) -> bool:
        return self.num_links == 4

    def replace(self, **changes: Any) -> "SchemeParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        out = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        out["scheme"] = self.scheme.value
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SchemeParams":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(sorted(unknown)[0], "unknown parameter")
        kwargs = dict(data)
        for key in ("total_distance_m", "eta_s", "eta_d", "eta_m", "tau_m_s", "l_att_m", "c_fiber_m_per_s"):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = float(kwargs[key])
        if kwargs.get("gamma") is not None:
            kwargs["gamma"] = float(kwargs["gamma"])
        if "num_links" in kwargs:
            kwargs["num_links"] = int(kwargs["num_links"])
        return cls(**kwargs)


@dataclass(frozen=True)
class LinkGeometry:
    l0_m: float
    t0_s: float
    r: float
    eta_t: float


def derive_link_geometry(params: SchemeParams) -> LinkGeometry:
    """Elementary-link length, attempt time, decay ratio and fiber transmission."""
    return LinkGeometry(l0_m=params.l0_m, t0_s=params.t0_s, r=params.r, eta_t=params.eta_t)


@dataclass(frozen=True)
class HardwarePreset:
    name: str
    scheme: Scheme
    description: str
    values: Mapping[str, float] = field(default_factory=dict)

    def build(self, total_distance_m: float = 100e3, **overrides: Any) -> SchemeParams:
        kwargs: dict[str, Any] = {"scheme": self.scheme, "total_distance_m": total_distance_m}
        kwargs.update(self.values)
        kwargs.update(overrides)
        return SchemeParams(**kwargs)


_ETA_D = 0.95
_REI = {"eta_m": 0.70, "tau_m_s": 1e-3}
_RA = {"eta_m": 0.75, "tau_m_s": 0.220}

PRESETS: dict[str, HardwarePreset] = {
    p.name: p
    for p in (
        HardwarePreset("A", Scheme.SPS_1BSM, "1+1, quantum-dot source + rare-earth memory",
                       {"gamma": 0.2, "eta_s": 0.75, "eta_d": _ETA_D, **_REI}),
        HardwarePreset("B", Scheme.SPS_1BSM, "1+1, Rydberg-atom source and memory",
                       {"gamma": 0.2, "eta_s": 0.15, "eta_d": _ETA_D, **_RA}),
        HardwarePreset("C", Scheme.DPPS_2BSM, "2+2, quantum-dot pair source + rare-earth memory",
                       {"eta_s": 0.5, "eta_d": _ETA_D, **_REI}),
        HardwarePreset("D", Scheme.DPPS_2BSM, "2+2, Rydberg-atom pair source and memory",
                       {"eta_s": 0.15, "eta_d": _ETA_D, **_RA}),
        HardwarePreset("E", Scheme.NDPPS_1BSM, "2~+1, PDC source + rare-earth memory",
                       {"eta_s": 0.03, "eta_d": _ETA_D, **_REI}),
        HardwarePreset("F", Scheme.NDPPS_2BSM, "2~+2, PDC source + rare-earth memory",
                       {"eta_s": 0.03, "eta_d": _ETA_D, **_REI}),
    )
}


def register_preset(preset: HardwarePreset) -> None:
    preset.build()  # validates the template
    PRESETS[preset.name] = preset


def load_preset(name: str, total_distance_m: float = 100e3, **overrides: Any) -> SchemeParams:
    """Build ``SchemeParams`` from a named preset; ``overrides`` replace template values."""
    key = name.strip()
    try:
        preset = PRESETS[key] if key in PRESETS else PRESETS[key.upper()]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}") from None
    return preset.build(total_distance_m, **overrides)


class MemoryKind(enum.Enum):
    EXPONENTIAL = "exponential"
    CUTOFF = "cutoff"


@dataclass(frozen=True)
class MemoryModel:
    """How stored fidelity survives a wait of ``dt`` seconds.

    Exponential decay scales fidelity by ``exp(-dt / tau_m)``.  A hard cutoff
    keeps it intact up to ``cutoff_s`` and discards it afterwards.
    """

    kind: MemoryKind = MemoryKind.EXPONENTIAL
    cutoff_s: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", MemoryKind(self.kind))
        if self.kind is MemoryKind.CUTOFF and not (self.cutoff_s is not None and self.cutoff_s > 0):
            raise ParameterError("cutoff_s", "hard cutoff needs a positive cutoff time")

    @classmethod
    def exponential(cls) -> "MemoryModel":
        return cls(MemoryKind.EXPONENTIAL)

    @classmethod
    def hard_cutoff(cls, cutoff_s: float) -> "MemoryModel":
        return cls(MemoryKind.CUTOFF, float(cutoff_s))

    def survival(self, dt_s, tau_m_s: float):
        dt = np.asarray(dt_s, dtype=float)
        if self.kind is MemoryKind.EXPONENTIAL:
            if math.isinf(tau_m_s):
                return np.ones_like(dt)
            return np.exp(-dt / tau_m_s)
        return np.where(dt <= self.cutoff_s, 1.0, 0.0)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "cutoff_s": self.cutoff_s}
