"""Parameter sweeps over the analytic and Monte Carlo engines.

A sweep is a Cartesian grid of axes over one or more base parameter sets
(series).  Cells are evaluated independently and emitted in canonical
order: series first, then row-major over the axes in the order given.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .. import analytic
from ..model import PRESETS, SchemeParams, load_preset
from ..montecarlo import SimConfig, simulate_postselected, simulate_two_link
from ..montecarlo.engine import DEFAULT_MAX_ATTEMPTS
from .config import ConfigError, si_name
from .tables import ResultTable

PARAM_COLUMNS = [
    "scheme", "total_distance_m", "eta_s", "eta_d", "eta_m", "tau_m_s", "gamma", "num_links",
    "l_att_m", "c_fiber_m_per_s",
]
OUTPUT_COLUMNS = [
    "engine", "postselected", "rate_hz", "rate_se_hz", "edt_lower_s", "edt_mid_s", "edt_upper_s", "edt_se_s",
    "fidelity", "beta_assumption", "p0", "avg_ps", "below_threshold", "n_trials", "n_truncated", "seed",
]
RESULT_COLUMNS = PARAM_COLUMNS + OUTPUT_COLUMNS
SWEEP_COLUMNS = ["series", "cell"] + RESULT_COLUMNS
ISO_COLUMNS = ["series", "tau_m_s", "eta_m", "rate_hz", "target_rate_hz", "status"]

_NUMERIC_FIELDS = {"total_distance_m", "eta_s", "eta_d", "eta_m", "tau_m_s", "gamma", "l_att_m", "c_fiber_m_per_s"}

MEMORY_TAU_RANGE_S = (1e-4, 10.0)
MEMORY_ETA_RANGE = (0.05, 1.0)
MEMORY_GRID = (60, 40)
DISTANCE_RANGE_M = (10e3, 200e3)
DISTANCE_POINTS = 39


@dataclass(frozen=True)
class Axis:
    """One sweep axis over a numeric SchemeParams field (SI units)."""

    param: str
    start: float
    stop: float
    points: int
    spacing: str = "linear"

    def __post_init__(self) -> None:
        if self.param not in _NUMERIC_FIELDS:
            raise ConfigError("sweep.axes.param", f"{self.param!r} is not a numeric SchemeParams field")
        if self.points < 1:
            raise ConfigError("sweep.axes.points", "need at least one point")
        if self.spacing not in ("linear", "log"):
            raise ConfigError("sweep.axes.spacing", f"expected 'linear' or 'log', got {self.spacing!r}")
        if self.spacing == "log" and not (self.start > 0 and self.stop > 0):
            raise ConfigError("sweep.axes", f"log spacing needs positive bounds for {self.param!r}")
        if not (math.isfinite(self.start) and math.isfinite(self.stop)):
            raise ConfigError("sweep.axes", f"bounds of {self.param!r} must be finite")

    def values(self) -> list[float]:
        if self.spacing == "log":
            v = np.geomspace(self.start, self.stop, self.points)
        else:
            v = np.linspace(self.start, self.stop, self.points)
        return [float(x) for x in v]

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "Axis":
        """Axis from ``{param, min, max, points, spacing}``; ``param`` may carry a unit suffix."""
        try:
            key = data["param"]
            name, factor = si_name(key)
            return cls(name, float(data["min"]) * factor, float(data["max"]) * factor,
                       int(data.get("points", 10)), data.get("spacing", "linear"))
        except KeyError as exc:
            raise ConfigError(f"sweep.axes.{exc.args[0]}", "required axis key is missing") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("sweep.axes", f"invalid axis {dict(data)!r}") from None

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class EngineOptions:
    engine: str = "analytic"
    trials: int = 10_000
    seed: int = 0
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    workers: int = 1

    @property
    def engines(self) -> tuple[str, ...]:
        return ("analytic", "mc") if self.engine == "both" else (self.engine,)


@dataclass(frozen=True)
class SweepSpec:
    """Axes, fixed parameters per series, and the engine selector."""

    axes: tuple[Axis, ...]
    series: Mapping[str, SchemeParams]
    options: EngineOptions = field(default_factory=EngineOptions)

    def __post_init__(self) -> None:
        names = [a.param for a in self.axes]
        if len(set(names)) != len(names):
            raise ConfigError("sweep.axes", "each parameter may appear on one axis only")
        if not self.series:
            raise ConfigError("sweep", "no base parameters given")

    def cells(self) -> list[tuple[str, int, SchemeParams]]:
        grids = [a.values() for a in self.axes]
        out = []
        for label, base in self.series.items():
            for i, combo in enumerate(itertools.product(*grids)):
                out.append((label, i, base.replace(**dict(zip((a.param for a in self.axes), combo)))))
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "axes": [a.to_dict() for a in self.axes],
            "series": {k: v.to_dict() for k, v in self.series.items()},
            "options": dataclasses.asdict(self.options),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SweepSpec":
        return cls(
            axes=tuple(Axis(**a) for a in data["axes"]),
            series={k: SchemeParams.from_dict(v) for k, v in data["series"].items()},
            options=EngineOptions(**data["options"]),
        )


def _analytic_row(params: SchemeParams) -> dict[str, Any]:
    res = analytic.rate(params, postselect=params.postselected)
    return {
        "engine": "analytic", "postselected": res.postselected, "rate_hz": res.rate_hz,
        "edt_lower_s": res.edt_lower_s, "edt_mid_s": res.edt_mid_s, "edt_upper_s": res.edt_upper_s,
        "fidelity": res.final_alpha, "beta_assumption": res.beta_assumption.value, "p0": res.p0,
        "avg_ps": res.avg_ps, "below_threshold": res.below_threshold,
    }


def _mc_row(params: SchemeParams, options: EngineOptions) -> dict[str, Any]:
    gen = analytic.generation(params)
    row: dict[str, Any] = {"engine": "mc", "postselected": params.postselected, "p0": gen.p0,
                           "n_trials": options.trials, "seed": options.seed}
    if gen.p0 <= 0.0:
        row.update(rate_hz=0.0, edt_mid_s=math.inf, below_threshold=True, n_truncated=options.trials)
        return row
    cfg = SimConfig.from_params(params, options.trials, options.seed,
                                max_attempts_per_trial=options.max_attempts, workers=options.workers)
    if params.postselected:
        rep = simulate_postselected(cfg)
        fidelity = 1.0
    else:
        rep = simulate_two_link(cfg)
        fidelity = rep["final_alpha"].mean if params.scheme.single_photon_bsm else 1.0
        row["avg_ps"] = rep["ps"].mean
    edt = rep["edt_s"]
    ok = edt.n_samples > 0 and edt.mean > 0
    row.update(
        rate_hz=1.0 / edt.mean if ok else 0.0,
        rate_se_hz=edt.standard_error / edt.mean**2 if ok else None,
        edt_mid_s=edt.mean if ok else math.inf,
        edt_se_s=edt.standard_error if ok else None,
        fidelity=fidelity,
        below_threshold=not ok,
        n_truncated=rep.n_truncated,
    )
    return row


def evaluate(params: SchemeParams, options: EngineOptions) -> list[dict[str, Any]]:
    """One result row per selected engine, each with the full parameter tuple."""
    base = {k: v for k, v in params.to_dict().items() if k in PARAM_COLUMNS}
    rows = []
    for engine in options.engines:
        out = _analytic_row(params) if engine == "analytic" else _mc_row(params, options)
        rows.append({**base, **out})
    return rows


def _analytic_cell(params: SchemeParams) -> dict[str, Any]:
    return {**{k: v for k, v in params.to_dict().items() if k in PARAM_COLUMNS}, **_analytic_row(params)}


def run_sweep(spec: SweepSpec) -> ResultTable:
    cells = spec.cells()
    opts = spec.options
    table = ResultTable(list(SWEEP_COLUMNS))
    if opts.engines == ("analytic",) and opts.workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=opts.workers) as pool:
            results = [[r] for r in pool.map(_analytic_cell, [c[2] for c in cells], chunksize=64)]
    else:
        results = [evaluate(params, opts) for _, _, params in cells]
    for (label, i, _), rows in zip(cells, results):
        for row in rows:
            table.append({"series": label, "cell": i, **row})
    return table


def memory_axes(tau_points: int = MEMORY_GRID[0], eta_points: int = MEMORY_GRID[1],
                tau_range_s: tuple[float, float] = MEMORY_TAU_RANGE_S,
                eta_range: tuple[float, float] = MEMORY_ETA_RANGE) -> tuple[Axis, Axis]:
    return (Axis("tau_m_s", tau_range_s[0], tau_range_s[1], tau_points, "log"),
            Axis("eta_m", eta_range[0], eta_range[1], eta_points, "linear"))


def sweep_memory(base: SchemeParams, axes: Sequence[Axis] | None = None,
                 options: EngineOptions | None = None, label: str = "base") -> ResultTable:
    """Rate over the (lifetime, memory efficiency) plane at fixed distance and scheme."""
    axes = tuple(axes) if axes is not None else memory_axes()
    if sorted(a.param for a in axes) != ["eta_m", "tau_m_s"]:
        raise ConfigError("sweep.axes", "a memory sweep needs exactly the axes tau_m_s and eta_m")
    return run_sweep(SweepSpec(axes, {label: base}, options or EngineOptions()))


def _log_rate_gap(params: SchemeParams, target: float) -> float:
    r = analytic.rate(params, postselect=params.postselected).rate_hz
    return math.log(r / target) if r > 0 else -math.inf


def iso_rate_point(base: SchemeParams, tau_m_s: float, target_rate_hz: float,
                   eta_range: tuple[float, float] = MEMORY_ETA_RANGE, rtol: float = 1e-4) -> dict[str, Any]:
    """Memory efficiency at which the rate equals ``target_rate_hz`` for a fixed lifetime.

    Bisection along eta_m; the rate is increasing in eta_m.  ``status`` is
    ``"below"`` when even the top of the range misses the target and
    ``"above"`` when the bottom already exceeds it.
    """
    lo, hi = eta_range
    p = base.replace(tau_m_s=tau_m_s)
    g_lo = _log_rate_gap(p.replace(eta_m=lo), target_rate_hz)
    g_hi = _log_rate_gap(p.replace(eta_m=hi), target_rate_hz)
    row = {"tau_m_s": tau_m_s, "target_rate_hz": target_rate_hz, "eta_m": None, "rate_hz": None}
    if g_hi < 0:
        return {**row, "status": "below"}
    if g_lo > 0:
        return {**row, "status": "above"}
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g = _log_rate_gap(p.replace(eta_m=mid), target_rate_hz)
        if abs(g) < rtol:
            lo = hi = mid
            break
        if g < 0:
            lo = mid
        else:
            hi = mid
    eta = 0.5 * (lo + hi)
    rate = analytic.rate(p.replace(eta_m=eta), postselect=p.postselected).rate_hz
    return {**row, "eta_m": eta, "rate_hz": rate, "status": "ok"}


def iso_rate_curve(base: SchemeParams, target_rate_hz: float, tau_values: Iterable[float],
                   eta_range: tuple[float, float] = MEMORY_ETA_RANGE, label: str = "base") -> ResultTable:
    table = ResultTable(list(ISO_COLUMNS))
    for tau in tau_values:
        table.append({"series": label, **iso_rate_point(base, tau, target_rate_hz, eta_range)})
    return table


def distance_axis(start_m: float = DISTANCE_RANGE_M[0], stop_m: float = DISTANCE_RANGE_M[1],
                  points: int = DISTANCE_POINTS, spacing: str = "linear") -> Axis:
    return Axis("total_distance_m", start_m, stop_m, points, spacing)


def preset_series(presets: Iterable[str] | None = None, postselect: bool | None = None,
                  **overrides: Any) -> dict[str, SchemeParams]:
    """Base params for each named preset; single-photon presets postselect unless told otherwise."""
    names = list(presets) if presets is not None else sorted(PRESETS)
    out = {}
    for name in names:
        try:
            params = load_preset(name, **overrides)
        except KeyError as exc:
            raise ConfigError("preset", exc.args[0]) from None
        out[name.strip().upper()] = arrangement(params, postselect)
    return out


def arrangement(params: SchemeParams, postselect: bool | None = None) -> SchemeParams:
    """Fix ``num_links`` from the postselection choice (auto: postselect single-photon BSM)."""
    if postselect is None:
        postselect = params.postselected or params.scheme.single_photon_bsm
    if postselect and not params.scheme.single_photon_bsm:
        raise ConfigError("postselect", f"postselection needs a single-photon BSM scheme, not {params.scheme.value!r}")
    return params.replace(num_links=4 if postselect else 2)


def sweep_distance(series: Mapping[str, SchemeParams], axis: Axis | None = None,
                   options: EngineOptions | None = None) -> ResultTable:
    """Rate versus total distance for each series (e.g. presets A-F)."""
    axis = axis or distance_axis()
    if axis.param != "total_distance_m":
        raise ConfigError("sweep.axes", "a distance sweep needs the total_distance_m axis")
    return run_sweep(SweepSpec((axis,), dict(series), options or EngineOptions()))
