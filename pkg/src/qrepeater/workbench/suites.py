"""Validation suites: Monte Carlo estimator grids checked against fixed thresholds.

Each suite returns a :class:`SuiteResult` holding a data table and a list of
checks.  A check is *blocking* unless it only records a known, unresolved
discrepancy; the suite passes when every blocking check passes.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .. import analytic
from ..model import load_preset
from ..montecarlo import (
    LinkProtocol,
    SimConfig,
    beta_grid,
    simulate_postselected,
    simulate_two_link,
    validate_tdif_distribution,
)
from ..montecarlo.validation import cutoff_grid
from .tables import ResultTable

SUITES = ("beta", "tdif", "tminmax", "cutoff", "cross-engine")

BETA_P0 = tuple(float(x) for x in np.geomspace(1e-3, 0.5, 12))
BETA_R = (0.001, 0.01, 0.1, 1.0)
BETA_ALPHA0 = (0.9, 0.5, 0.1)
BETA_MIN = 0.84
BETA_TOL = 0.02
BETA_ETA_D = 0.95

TDIF_REGIMES = tuple((p0, r) for p0 in (0.01, 0.1) for r in (0.01, 1.0))
TDIF_ALPHA0 = 1.0
TDIF_ETA_D = 0.95
TV_MAX = 0.05
TMINMAX_RTOL = 0.05

CUTOFF_P0 = (0.01, 0.02, 0.05, 0.1, 0.2, 0.5)
CUTOFF_RATIOS = (1.0, 10.0, 100.0, 1000.0)
CUTOFF_AGREE = 1.10
CUTOFF_DIFFER = 2.0
CUTOFF_DIRECT_TOL = 1e-12
# ratios <p_s>_cut / <p_s>_exp quoted for tau_m / T0 = 1
CUTOFF_CLAIMED = {0.1: 48.5, 0.01: 521.0}

# (bsm photons, p0, T0/tau_m, alpha0)
CROSS_GRID = (
    (1, 0.01, 0.0, 1.0), (1, 0.1, 0.01, 0.8), (1, 0.5, 0.1, 0.8), (1, 0.01, 0.1, 0.8),
    (2, 0.01, 0.0, 1.0), (2, 0.1, 0.01, 0.8), (2, 0.5, 0.1, 0.8), (2, 0.01, 0.1, 0.8),
)
CROSS_ETA_D = 0.95
CROSS_Z = 3.0
MIDPOINT_RTOL = 0.5
POSTSELECT_FACTOR = 2.0

DEFAULT_TRIALS = {"beta": 100_000, "tdif": 1_000_000, "tminmax": 1_000_000, "cutoff": 100_000,
                  "cross-engine": 100_000}


@dataclass
class Check:
    name: str
    passed: bool
    value: float | None
    threshold: str
    detail: str = ""
    blocking: bool = True


@dataclass
class SuiteResult:
    suite: str
    table: ResultTable
    checks: list[Check]
    parameters: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.blocking)

    def report(self) -> dict[str, Any]:
        return {
            "suite": self.suite,
            "passed": self.passed,
            "parameters": self.parameters,
            "checks": [asdict(c) for c in self.checks],
        }

    def write_report(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.report(), indent=1) + "\n", encoding="utf-8")
        return path


def suite_beta(trials: int | None = None, seed: int = 0, workers: int = 1) -> SuiteResult:
    n = trials or DEFAULT_TRIALS["beta"]
    rows = beta_grid(1, BETA_P0, BETA_R, BETA_ALPHA0, BETA_ETA_D, n, seed, workers)
    rows += beta_grid(2, BETA_P0, BETA_R, (BETA_ALPHA0[0],), BETA_ETA_D, n, seed, workers)
    table = ResultTable.from_records(rows)
    single = [r for r in rows if r["bsm_photons"] == 1]
    worst = min(single, key=lambda r: r["beta_mc"])

    def two(p0, r):
        return next(x for x in rows if x["bsm_photons"] == 2 and x["p0"] == p0 and x["t0_over_tau"] == r)

    low, high = two(BETA_P0[0], 1.0), two(BETA_P0[-1], 0.001)
    z = max(abs(r["beta_mc"] - r["beta_exact"]) / r["beta_se"] for r in rows if r["beta_se"] > 0)
    checks = [
        Check("single_photon_min_beta", worst["beta_mc"] >= BETA_MIN - BETA_TOL, worst["beta_mc"],
              f">= {BETA_MIN} - {BETA_TOL}",
              f"at p0={worst['p0']:.4g}, T0/tau={worst['t0_over_tau']}, alpha0={worst['alpha0']}; "
              f"exact {worst['beta_exact']:.4f}"),
        Check("two_photon_low_p0", low["beta_mc"] < 0.1, low["beta_mc"], "< 0.1",
              f"p0={low['p0']:.4g}, T0/tau=1"),
        Check("two_photon_high_p0", high["beta_mc"] > 0.9, high["beta_mc"], "> 0.9",
              f"p0={high['p0']:.4g}, T0/tau=0.001"),
        Check("mc_matches_exact_sum", z <= 5.0, z, "max |z| <= 5", "MC beta against truncated exact sum"),
    ]
    return SuiteResult("beta", table, checks, {"trials": n, "seed": seed, "p0": list(BETA_P0),
                                                "t0_over_tau": list(BETA_R), "alpha0": list(BETA_ALPHA0),
                                                "eta_d": BETA_ETA_D})


def _tdif_rows(n: int, seed: int, workers: int) -> list[dict[str, Any]]:
    rows = []
    for p0, r in TDIF_REGIMES:
        proto = LinkProtocol.dimensionless(1, p0, TDIF_ALPHA0, TDIF_ETA_D, r)
        rep = validate_tdif_distribution(proto, n, seed, workers=workers)
        m = rep.meta
        rows.append({
            "p0": p0, "t0_over_tau": r, "alpha0": TDIF_ALPHA0, "eta_d": TDIF_ETA_D, "p0_chain": m["p0_chain"],
            "tv_distance": rep["tv_distance"].mean,
            "t_min_mc_s": rep["t_min_s"].mean, "t_min_se_s": rep["t_min_s"].standard_error,
            "t_min_model_s": m["model_t_min_s"],
            "t_max_mc_s": rep["t_max_s"].mean, "t_max_se_s": rep["t_max_s"].standard_error,
            "t_max_model_s": m["model_t_max_s"],
            "n_pairs": rep["tv_distance"].n_samples, "n_truncated": rep.n_truncated,
        })
    return rows


def suite_tdif(trials: int | None = None, seed: int = 0, workers: int = 1) -> SuiteResult:
    n = trials or DEFAULT_TRIALS["tdif"]
    rows = _tdif_rows(n, seed, workers)
    checks = [
        Check(f"tv_p0={r['p0']}_r={r['t0_over_tau']}", r["tv_distance"] < TV_MAX, r["tv_distance"], f"< {TV_MAX}")
        for r in rows
    ]
    return SuiteResult("tdif", ResultTable.from_records(rows), checks,
                       {"trials": n, "seed": seed, "regimes": [list(x) for x in TDIF_REGIMES]})


def suite_tminmax(trials: int | None = None, seed: int = 0, workers: int = 1) -> SuiteResult:
    n = trials or DEFAULT_TRIALS["tminmax"]
    rows = _tdif_rows(n, seed, workers)
    checks = []
    for r in rows:
        for key in ("t_min", "t_max"):
            dev = r[f"{key}_mc_s"] / r[f"{key}_model_s"] - 1.0
            checks.append(Check(f"{key}_p0={r['p0']}_r={r['t0_over_tau']}", abs(dev) <= TMINMAX_RTOL, dev,
                                f"|relative deviation| <= {TMINMAX_RTOL}"))
    return SuiteResult("tminmax", ResultTable.from_records(rows), checks,
                       {"trials": n, "seed": seed, "regimes": [list(x) for x in TDIF_REGIMES]})


def _direct_cutoff(p0: float, ratio: float) -> float:
    return 1.0 - 2.0 * (1.0 - p0) ** (ratio / 2.0) / (2.0 - p0)


def _direct_exponential(p0: float, r: float) -> float:
    e = math.exp(r)
    return p0 / (2.0 - p0) * (e + 1.0 - p0) / (e - 1.0 + p0)


def _spread(a: float, b: float) -> float:
    if a <= 0 or b <= 0:
        return math.inf
    return max(a / b, b / a)


def suite_cutoff(trials: int | None = None, seed: int = 0, workers: int = 1) -> SuiteResult:
    n = trials or DEFAULT_TRIALS["cutoff"]
    rows = cutoff_grid(CUTOFF_P0, CUTOFF_RATIOS, n, seed, workers)
    direct_err = 0.0
    for row in rows:
        p0, ratio = row["p0"], row["tau_over_t0"]
        row["ps_cut_direct"] = _direct_cutoff(p0, ratio)
        row["ps_exp_direct"] = _direct_exponential(p0, 1.0 / ratio)
        row["spread_printed"] = _spread(row["ps_cut_printed"], row["ps_exp_printed"])
        row["spread_mc"] = _spread(row["ps_cut_mc"], row["ps_exp_mc"])
        direct_err = max(direct_err, abs(row["ps_cut_printed"] - row["ps_cut_direct"]),
                         abs(row["ps_exp_printed"] - row["ps_exp_direct"]))
    long_ = [r for r in rows if r["tau_over_t0"] >= 100]
    short = [r for r in rows if r["tau_over_t0"] == 1]
    worst_long = max(long_, key=lambda r: r["spread_printed"])
    worst_short = min(short, key=lambda r: r["spread_printed"])
    checks = [
        Check("printed_forms_match_direct_evaluation", direct_err <= CUTOFF_DIRECT_TOL, direct_err,
              f"<= {CUTOFF_DIRECT_TOL}"),
        Check("agree_at_tau_over_t0_ge_100", worst_long["spread_printed"] <= CUTOFF_AGREE,
              worst_long["spread_printed"], f"max(cut/exp, exp/cut) <= {CUTOFF_AGREE}",
              f"worst at p0={worst_long['p0']}, tau/T0={worst_long['tau_over_t0']}"),
        Check("differ_at_tau_over_t0_eq_1", worst_short["spread_printed"] > CUTOFF_DIFFER,
              worst_short["spread_printed"], f"max(cut/exp, exp/cut) > {CUTOFF_DIFFER}",
              f"smallest at p0={worst_short['p0']}"),
    ]
    for p0, claimed in CUTOFF_CLAIMED.items():
        row = next(r for r in short if r["p0"] == p0)
        computed = row["ratio_printed"]
        agrees = math.isclose(computed, claimed, rel_tol=0.01)
        checks.append(Check(f"claimed_ratio_p0={p0}", agrees, computed, f"claimed {claimed}",
                            f"computed cut/exp from the printed forms (exp/cut = {1.0 / computed:.4g}); "
                            "discrepancy is recorded, not failed",
                            blocking=False))
    return SuiteResult("cutoff", ResultTable.from_records(rows), checks,
                       {"trials": n, "seed": seed, "p0": list(CUTOFF_P0), "tau_over_t0": list(CUTOFF_RATIOS)})


def _postselect_rows(n: int, seed: int, workers: int) -> list[dict[str, Any]]:
    rows = []
    for label, overrides in (("A-perfect-memory", {"eta_m": 1.0, "tau_m_s": math.inf}), ("A", {})):
        params = load_preset("A", **overrides).replace(num_links=4)
        an = analytic.edt_postselected(params)
        rep = simulate_postselected(SimConfig.from_params(params, n, seed, workers=workers))
        mc = rep["edt_s"]
        rows.append({
            "case": f"postselected:{label}", "bsm_photons": 1, "p0": an.p0, "t0_over_tau": params.r,
            "alpha0": analytic.generation(params).alpha0, "eta_d": params.eta_d,
            "edt_mc": mc.mean, "edt_se": mc.standard_error, "edt_lower": an.edt_lower_s, "edt_mid": an.edt_mid_s,
            "edt_upper": an.edt_upper_s, "n_trials": n, "n_truncated": rep.n_truncated,
        })
    return rows


def suite_cross_engine(trials: int | None = None, seed: int = 0, workers: int = 1) -> SuiteResult:
    n = trials or DEFAULT_TRIALS["cross-engine"]
    rows = []
    checks = []
    for bsm, p0, r, a0 in CROSS_GRID:
        proto = LinkProtocol.dimensionless(bsm, p0, a0, CROSS_ETA_D, r)
        rep = simulate_two_link(SimConfig(proto, n, seed, workers=workers))
        stats = analytic.attempt_expectations(p0, r)
        if bsm == 1:
            ps = analytic.avg_swap_single(p0, a0, CROSS_ETA_D, r).avg_ps
            lower = mid = upper = stats.exp_n_max / ps
        else:
            ps = analytic.avg_swap_two_photon(p0, a0, CROSS_ETA_D, r)
            lower, mid, upper = stats.exp_n_min / ps, 1.0 / (p0 * ps), stats.exp_n_max / ps
        e = rep["edt_s"]
        rows.append({"case": f"two-link:{bsm}", "bsm_photons": bsm, "p0": p0, "t0_over_tau": r, "alpha0": a0,
                     "eta_d": CROSS_ETA_D, "edt_mc": e.mean, "edt_se": e.standard_error, "edt_lower": lower,
                     "edt_mid": mid, "edt_upper": upper, "n_trials": n, "n_truncated": rep.n_truncated})
        tag = f"bsm={bsm}_p0={p0}_r={r}_a0={a0}"
        if bsm == 1:
            z = (e.mean - mid) / e.standard_error
            checks.append(Check(f"single_photon_within_3se_{tag}", abs(z) <= CROSS_Z, z, f"|z| <= {CROSS_Z}"))
        else:
            inside = lower - CROSS_Z * e.standard_error <= e.mean <= upper + CROSS_Z * e.standard_error
            pos = (e.mean - lower) / (upper - lower)
            checks.append(Check(f"two_photon_within_bounds_{tag}", inside, pos,
                                "0 <= (mc - lower)/(upper - lower) <= 1 (3 SE slack)"))
            dev = abs(mid / e.mean - 1.0)
            checks.append(Check(f"two_photon_midpoint_error_{tag}", dev <= MIDPOINT_RTOL, dev,
                                f"|mid/mc - 1| <= {MIDPOINT_RTOL}"))
    post = _postselect_rows(max(n // 50, 200), seed, workers)
    rows += post
    for row in post:
        factor = _spread(row["edt_mc"], row["edt_mid"])
        checks.append(Check(f"{row['case']}_within_factor_2", factor <= POSTSELECT_FACTOR, factor,
                            f"max(mc/analytic, analytic/mc) <= {POSTSELECT_FACTOR}"))
    return SuiteResult("cross-engine", ResultTable.from_records(rows), checks,
                       {"trials": n, "seed": seed, "eta_d": CROSS_ETA_D})


RUNNERS: dict[str, Callable[..., SuiteResult]] = {
    "beta": suite_beta,
    "tdif": suite_tdif,
    "tminmax": suite_tminmax,
    "cutoff": suite_cutoff,
    "cross-engine": suite_cross_engine,
}


def run_suite(name: str, trials: int | None = None, seed: int = 0, workers: int = 1) -> SuiteResult:
    try:
        runner = RUNNERS[name]
    except KeyError:
        raise KeyError(f"unknown suite {name!r}; available: {', '.join(SUITES)}") from None
    return runner(trials, seed, workers)
