"""Estimators that test the approximations behind the analytic formulas.

Each estimator samples the exact joint process and puts the quantity the
closed form assumes next to what the simulation actually produces.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .. import analytic
from ..model import MemoryModel
from .engine import (
    DEFAULT_MAX_ATTEMPTS,
    Estimate,
    EstimatorReport,
    LinkProtocol,
    SimConfig,
    _swap,
    run_chains,
    sample_geometric,
    simulate_two_link,
)
from .rng import run_blocks

__all__ = [
    "estimate_attempt_statistics",
    "estimate_swap_averages",
    "estimate_beta",
    "exact_beta",
    "beta_grid",
    "validate_tdif_distribution",
    "compare_cutoff_vs_exponential",
    "cutoff_grid",
]


def _pairs_kernel(rng, n, index, p0):
    n1 = sample_geometric(p0, rng, n)
    n2 = sample_geometric(p0, rng, n)
    return {"n1": n1, "n2": n2}


def estimate_attempt_statistics(p0: float, n_samples: int, master_seed: int = 0, workers: int = 1) -> EstimatorReport:
    """Sample means of ``n_max``, ``n_min`` and ``n_dif``."""
    cols = run_blocks(_pairs_kernel, n_samples, master_seed, f"attempts:{p0!r}", workers, p0=p0)
    n1, n2 = cols["n1"], cols["n2"]
    return EstimatorReport(
        estimates={
            "n_max": Estimate.from_samples(np.maximum(n1, n2)),
            "n_min": Estimate.from_samples(np.minimum(n1, n2)),
            "n_dif": Estimate.from_samples(np.abs(n1 - n2)),
        },
        n_trials=n_samples,
        meta={"procedure": "attempt-statistics", "p0": p0, "master_seed": master_seed},
    )


def _swap_kernel(rng, n, index, proto, memory):
    n1 = sample_geometric(proto.p0, rng, n)
    n2 = sample_geometric(proto.p0, rng, n)
    ndif = np.abs(n1 - n2)
    ps, alpha = _swap(proto, memory, ndif)
    return {"ndif": ndif, "ps": ps, "alpha": alpha}


def _stream(name: str, proto: LinkProtocol) -> str:
    return f"{name}:{proto.bsm_photons}:{proto.p0!r}:{proto.alpha0!r}:{proto.eta_d!r}:{proto.r!r}"


def estimate_swap_averages(proto: LinkProtocol, n_samples: int, master_seed: int = 0,
                           memory: MemoryModel | None = None, workers: int = 1) -> EstimatorReport:
    """Unconditional ``<alpha>`` and ``<p_s>`` of one swap attempt."""
    memory = memory or MemoryModel.exponential()
    cols = run_blocks(_swap_kernel, n_samples, master_seed, _stream("swap", proto), workers, proto=proto, memory=memory)
    estimates = {"ps": Estimate.from_samples(cols["ps"])}
    if proto.bsm_photons == 1:
        estimates["alpha"] = Estimate.from_samples(cols["alpha"])
    return EstimatorReport(estimates, n_samples, meta={"procedure": "swap-averages", "protocol": proto.to_dict()})


def _ratio_estimate(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> Estimate:
    # beta = <a> / (<b><c>), standard error by the delta method
    n = a.size
    ma, mb, mc = math.fsum(a) / n, math.fsum(b) / n, math.fsum(c) / n
    if mb == 0.0 or mc == 0.0:
        return Estimate(math.nan, math.nan, n)
    beta = ma / (mb * mc)
    infl = (a - ma) / (mb * mc) - beta * (b - mb) / mb - beta * (c - mc) / mc
    se = math.sqrt(math.fsum(infl**2) / (n - 1) / n) if n > 1 else math.nan
    return Estimate(beta, se, n)


def estimate_beta(proto: LinkProtocol, n_samples: int, master_seed: int = 0,
                  memory: MemoryModel | None = None, workers: int = 1) -> EstimatorReport:
    """``beta = <n_dif p_s> / (<n_dif><p_s>)`` from sampled attempt pairs."""
    memory = memory or MemoryModel.exponential()
    cols = run_blocks(_swap_kernel, n_samples, master_seed, _stream("beta", proto), workers, proto=proto, memory=memory)
    ndif = cols["ndif"].astype(float)
    ps = cols["ps"]
    return EstimatorReport(
        estimates={
            "beta": _ratio_estimate(ndif * ps, ndif, ps),
            "n_dif": Estimate.from_samples(ndif),
            "ps": Estimate.from_samples(ps),
        },
        n_trials=n_samples,
        meta={"procedure": "beta", "protocol": proto.to_dict()},
    )


def exact_beta(proto: LinkProtocol) -> float:
    """Beta by truncated summation over the n_dif distribution (exponential memory)."""
    p0, r = proto.p0, proto.r
    if p0 == 1.0:
        return math.nan
    memory = MemoryModel.exponential()

    def ps(n):
        return _swap(proto, memory, n)[0]

    mean_n = analytic.attempt_expectations(p0).exp_n_dif
    mean_ps = analytic.ndif_average(ps, p0)
    mean_nps = analytic.ndif_average(lambda n: n * ps(n), p0)
    return mean_nps / (mean_n * mean_ps)


def beta_grid(bsm_photons: int, p0_values: Iterable[float], r_values: Iterable[float],
              alpha0_values: Iterable[float] = (1.0,), eta_d: float = 0.95, n_samples: int = 100_000,
              master_seed: int = 0, workers: int = 1) -> list[dict]:
    rows = []
    for alpha0 in alpha0_values:
        for r in r_values:
            for p0 in p0_values:
                proto = LinkProtocol.dimensionless(bsm_photons, p0, alpha0, eta_d, r)
                est = estimate_beta(proto, n_samples, master_seed, workers=workers)["beta"]
                rows.append({
                    "bsm_photons": bsm_photons, "alpha0": alpha0, "t0_over_tau": r, "p0": p0, "eta_d": eta_d,
                    "beta_mc": est.mean, "beta_se": est.standard_error, "n_samples": est.n_samples,
                    "beta_exact": exact_beta(proto),
                })
    return rows


def _tdif_kernel(rng, n, index, proto, memory, max_attempts):
    ch = run_chains(rng, 2 * n, proto, memory, max_attempts)
    t = ch["time_units"].reshape(n, 2)
    ok = ch["done"].reshape(n, 2).all(axis=1)
    return {"t1": t[:, 0], "t2": t[:, 1], "ok": ok}


def validate_tdif_distribution(proto: LinkProtocol, n_pairs: int, master_seed: int = 0,
                               memory: MemoryModel | None = None,
                               max_attempts: int = DEFAULT_MAX_ATTEMPTS, workers: int = 1) -> EstimatorReport:
    """Compare the establish-time difference of two chains with the geometric model.

    The model treats each chain's establish time as ``m T0`` with ``m``
    geometric at ``p0' = 2 p0 <p_s> / 3``.  Reports the total-variation
    distance between the empirical and model pmfs of ``T_dif / T0`` and the
    empirical ``<T_min>``, ``<T_max>`` next to the model expectations.
    """
    if proto.bsm_photons != 1:
        raise analytic.SchemeMismatchError("chain-pair statistics are defined for single-photon BSM")
    memory = memory or MemoryModel.exponential()
    cols = run_blocks(_tdif_kernel, n_pairs, master_seed, _stream("tdif", proto), workers,
                      proto=proto, memory=memory, max_attempts=max_attempts)
    ok = cols["ok"]
    t1, t2 = cols["t1"][ok], cols["t2"][ok]
    tdif = np.abs(t1 - t2)
    avg_ps = analytic.avg_swap_single(proto.p0, proto.alpha0, proto.eta_d, proto.r).avg_ps
    p0_chain = 2.0 * proto.p0 * avg_ps / 3.0
    counts = np.bincount(tdif)
    emp = counts / counts.sum()
    d = np.arange(counts.size, dtype=float)
    model = analytic._log_weights(d, p0_chain) if p0_chain < 1.0 else (d == 0).astype(float)
    tail = analytic.ndif_tail_mass(counts.size, p0_chain)
    tv = 0.5 * (math.fsum(np.abs(emp - model)) + tail)
    expect = analytic.attempt_expectations(p0_chain)
    t0 = proto.t0_s
    return EstimatorReport(
        estimates={
            "tv_distance": Estimate(tv, math.nan, int(ok.sum())),
            "t_min_s": Estimate.from_samples(np.minimum(t1, t2) * t0),
            "t_max_s": Estimate.from_samples(np.maximum(t1, t2) * t0),
            "t_dif_s": Estimate.from_samples(tdif * t0),
        },
        n_trials=n_pairs,
        n_truncated=int((~ok).sum()),
        histograms={"t_dif_units": {"value": d.astype(int).tolist(), "empirical": emp.tolist(),
                                    "model": model.tolist()}},
        meta={
            "procedure": "tdif", "protocol": proto.to_dict(), "p0_chain": p0_chain, "avg_ps": avg_ps,
            "model_t_min_s": expect.exp_n_min * t0, "model_t_max_s": expect.exp_n_max * t0,
            "model_t_dif_s": expect.exp_n_dif * t0,
        },
    )


def compare_cutoff_vs_exponential(p0: float, tau_over_t0: float, n_trials: int, master_seed: int = 0,
                                  max_attempts: int = DEFAULT_MAX_ATTEMPTS, workers: int = 1) -> EstimatorReport:
    """Two-photon ``<p_s>`` (unit prefactor) under a hard cutoff and under exponential decay.

    Both runs share the seed.  The simulated cutoff discards a link once the
    doubled waiting time exceeds ``tau_m``, i.e. at ``tau_m / 2`` of waiting;
    the exponential run decays both memories.  Closed-form values are
    reported alongside: the printed continuous-exponent cutoff formula, its
    exact discrete counterpart, and the exponential average with single and
    double decay exponents.
    """
    proto = LinkProtocol(2, p0, 1.0, 1.0, 1.0, tau_over_t0, unit_prefactor=True)
    models = {"cut": MemoryModel.hard_cutoff(tau_over_t0), "exp": MemoryModel.exponential()}
    if math.isinf(tau_over_t0):
        models["cut"] = MemoryModel.exponential()
    estimates = {}
    truncated = 0
    for key, memory in models.items():
        cfg = SimConfig(proto, n_trials, master_seed, memory, max_attempts, workers=workers)
        rep = simulate_two_link(cfg)
        estimates[f"ps_{key}"] = rep["ps"]
        truncated += rep.n_truncated
    r = 1.0 / tau_over_t0
    ratio = estimates["ps_cut"].mean / estimates["ps_exp"].mean
    meta = {
        "procedure": "cutoff", "p0": p0, "tau_over_t0": tau_over_t0, "ratio_mc": ratio,
        "ps_cut_printed": analytic.cutoff_avg_ps(p0, tau_over_t0, 1.0),
        "ps_cut_discrete": analytic.cutoff_avg_ps(p0, tau_over_t0, 1.0, discrete=True),
        "ps_exp_printed": analytic.exponential_avg_ps(p0, r, 1),
        "ps_exp_double": analytic.exponential_avg_ps(p0, r, 2),
    }
    meta["ratio_printed"] = meta["ps_cut_printed"] / meta["ps_exp_printed"]
    return EstimatorReport(estimates, n_trials, truncated, meta=meta)


def cutoff_grid(p0_values: Sequence[float], ratios: Sequence[float], n_trials: int, master_seed: int = 0,
                workers: int = 1) -> list[dict]:
    rows = []
    for ratio in ratios:
        for p0 in p0_values:
            rep = compare_cutoff_vs_exponential(p0, ratio, n_trials, master_seed, workers=workers)
            row = {"tau_over_t0": ratio, "p0": p0}
            for key in ("ps_cut", "ps_exp"):
                row[f"{key}_mc"] = rep[key].mean
                row[f"{key}_se"] = rep[key].standard_error
            row.update({k: v for k, v in rep.meta.items() if k.startswith(("ps_", "ratio_"))})
            row["n_truncated"] = rep.n_truncated
            rows.append(row)
    return rows
