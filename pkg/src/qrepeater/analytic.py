"""Closed-form rates for two-link repeaters with exponentially decaying memories.

Waiting-time statistics come from two independent geometric attempt counts
``n1, n2``; the early link waits ``n_dif = |n1 - n2|`` attempts before the
swap, so its fidelity is scaled by ``exp(-n_dif * r)`` (``exp(-2 n_dif r)``
when both memories of the link decay, as in two-photon BSM schemes).

Averages over ``n_dif`` that have no closed form are evaluated as truncated
sums with log-domain weights, truncated once the neglected tail contributes
less than ``SUM_TOL``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import Scheme, SchemeParams

__all__ = [
    "SUM_TOL",
    "DegenerateStateError",
    "SchemeMismatchError",
    "LinkStatistics",
    "SwapOutcome",
    "SingleSwapAverages",
    "Generation",
    "BetaAssumption",
    "RateResult",
    "geometric_pmf",
    "ndif_pmf",
    "ndif_tail_mass",
    "ndif_truncation",
    "ndif_average",
    "attempt_expectations",
    "expected_decay_factor",
    "generation",
    "swap_single_photon",
    "swap_two_photon",
    "avg_swap_single",
    "avg_swap_two_photon",
    "edt_two_link",
    "edt_postselected",
    "rate",
    "cutoff_avg_ps",
    "exponential_avg_ps",
]

SUM_TOL = 1e-12
_CHUNK = 1 << 20
_DIRECT_SUM_LIMIT = 20_000_000


class DegenerateStateError(ValueError):
    """Both inputs to a single-photon swap are pure vacuum."""


class SchemeMismatchError(ValueError):
    pass


def _check_p0(p0: float) -> None:
    if not (0.0 < p0 <= 1.0):
        raise ValueError(f"p0 must lie in (0, 1], got {p0!r}")


def geometric_pmf(n: int, p0: float) -> float:
    """Probability that the first success happens on attempt ``n``."""
    _check_p0(p0)
    if n < 1:
        raise ValueError(f"attempt index must be >= 1, got {n!r}")
    if p0 == 1.0:
        return 1.0 if n == 1 else 0.0
    return p0 * math.exp((n - 1) * math.log1p(-p0))


def ndif_pmf(n_dif: int, p0: float) -> float:
    """Distribution of ``|n1 - n2|`` for two iid geometric attempt counts."""
    _check_p0(p0)
    if n_dif < 0:
        raise ValueError(f"n_dif must be >= 0, got {n_dif!r}")
    if n_dif == 0:
        return p0 / (2.0 - p0)
    if p0 == 1.0:
        return 0.0
    return 2.0 * p0 * math.exp(n_dif * math.log1p(-p0)) / (2.0 - p0)


def ndif_tail_mass(n: int, p0: float) -> float:
    """``P(n_dif >= n)``."""
    if n <= 0:
        return 1.0
    if p0 == 1.0:
        return 0.0
    return 2.0 * math.exp(n * math.log1p(-p0)) / (2.0 - p0)


def ndif_truncation(p0: float, tol: float = SUM_TOL) -> int:
    """Smallest ``N`` with ``P(n_dif >= N) < tol``."""
    _check_p0(p0)
    if p0 == 1.0:
        return 1
    n = math.ceil(math.log(tol * (2.0 - p0) / 2.0) / math.log1p(-p0))
    while ndif_tail_mass(n, p0) >= tol:
        n += 1
    return max(n, 1)


def _log_weights(n: np.ndarray, p0: float) -> np.ndarray:
    logw = math.log(2.0 * p0 / (2.0 - p0)) + n * math.log1p(-p0)
    w = np.exp(logw)
    w[n == 0] = p0 / (2.0 - p0)
    return w


def ndif_average(
    f: Callable[[np.ndarray], np.ndarray],
    p0: float,
    *,
    tol: float = SUM_TOL,
    limit: float | None = None,
) -> float:
    """Truncated expectation of ``f(n_dif)``.

    ``f`` must be vectorized.  When ``f`` is monotone with known limit
    ``limit`` as ``n_dif -> inf``, the sum stops early once
    ``|f(N) - limit| * P(n_dif >= N) < tol`` and the tail is closed with
    ``limit * P(n_dif >= N)``.
    """
    _check_p0(p0)
    if p0 == 1.0:
        return float(np.asarray(f(np.zeros(1)))[0])
    n_max = ndif_truncation(p0, tol)
    parts: list[float] = []
    start = 0
    while start < n_max:
        stop = min(start + _CHUNK, n_max)
        n = np.arange(start, stop, dtype=float)
        parts.append(float(np.sum(_log_weights(n, p0) * f(n))))
        start = stop
        if limit is not None and start < n_max:
            tail = ndif_tail_mass(start, p0)
            edge = float(np.asarray(f(np.array([float(start)])))[0])
            if abs(edge - limit) * tail < tol:
                parts.append(limit * tail)
                break
    return math.fsum(parts)


@dataclass(frozen=True)
class LinkStatistics:
    """Waiting-time expectations for two links generated in parallel."""

    p0: float
    exp_n_max: float
    exp_n_min: float
    exp_n_dif: float
    r: float = 0.0

    def decay_factor(self, multiplicity: int = 1) -> float:
        """``<exp(-multiplicity * n_dif * r)>``."""
        return expected_decay_factor(self.p0, self.r, multiplicity)


def attempt_expectations(p0: float, r: float = 0.0) -> LinkStatistics:
    _check_p0(p0)
    denom = (2.0 - p0) * p0
    n_min = 1.0 / denom
    n_dif = (2.0 - 2.0 * p0) / denom
    # n_max built from the other two so the identity holds to the bit
    return LinkStatistics(p0=p0, exp_n_max=n_min + n_dif, exp_n_min=n_min, exp_n_dif=n_dif, r=r)


def expected_decay_factor(p0: float, r: float, multiplicity: int = 1) -> float:
    """Closed form of ``sum_n ndif_pmf(n) * exp(-multiplicity * n * r)``."""
    _check_p0(p0)
    if r < 0:
        raise ValueError(f"r must be >= 0, got {r!r}")
    if multiplicity not in (1, 2):
        raise ValueError(f"multiplicity must be 1 or 2, got {multiplicity!r}")
    if r == 0.0 or p0 == 1.0:
        return 1.0
    x = multiplicity * r
    if x > 700.0:
        return p0 / (2.0 - p0)
    em1 = math.expm1(x)
    return p0 * (em1 + 2.0 - p0) / ((2.0 - p0) * (em1 + p0))


@dataclass(frozen=True)
class Generation:
    p0: float
    alpha0: float


def generation(params: SchemeParams) -> Generation:
    """Per-attempt heralding probability and fidelity of a fresh link."""
    eta_t, s, d, m = params.eta_t, params.eta_s, params.eta_d, params.eta_m
    scheme = params.scheme
    if scheme is Scheme.SPS_1BSM:
        return Generation(p0=2.0 * params.gamma * eta_t * s * d, alpha0=m * (1.0 - params.gamma))
    if scheme is Scheme.NDPPS_1BSM:
        return Generation(p0=2.0 * eta_t * s * d, alpha0=m)
    return Generation(p0=(eta_t * s * d) ** 2 / 2.0, alpha0=m * m)


@dataclass(frozen=True)
class SwapOutcome:
    alpha: float
    p_s: float


def swap_single_photon(alpha1: float, alpha2: float, eta_d: float) -> SwapOutcome:
    denom = alpha1 + alpha2 - alpha1 * alpha2 * eta_d
    if alpha1 == 0.0 and alpha2 == 0.0:
        raise DegenerateStateError("both links are pure vacuum; the swapped fidelity is undefined")
    alpha = alpha1 * alpha2 / denom
    p_s = (alpha1 * eta_d + alpha2 * eta_d - alpha1 * alpha2 * eta_d**2) / 2.0
    return SwapOutcome(alpha=alpha, p_s=p_s)


def swap_two_photon(alpha1: float, alpha2: float, eta_d: float) -> SwapOutcome:
    return SwapOutcome(alpha=1.0, p_s=alpha1 * alpha2 * eta_d**2 / 2.0)


@dataclass(frozen=True)
class SingleSwapAverages:
    avg_alpha: float
    avg_ps: float


def _avg_alpha_series(alpha0: float, c: float, p0: float, r: float, tol: float) -> float | None:
    # alpha0*x/(1+c*x) = alpha0 * sum_k (-c)^k x^(k+1), each moment in closed form
    total, k, ck = 0.0, 0, 1.0
    while k < 1_000_000:
        m = (k + 1) * r
        if m > 700.0:
            moment = p0 / (2.0 - p0)
        else:
            em1 = math.expm1(m)
            moment = p0 * (em1 + 2.0 - p0) / ((2.0 - p0) * (em1 + p0))
        term = alpha0 * ck * moment
        total += term if k % 2 == 0 else -term
        if term < tol * 1e-3:
            return total
        ck *= c
        k += 1
    return None


def avg_swap_single(p0: float, alpha0: float, eta_d: float, r: float) -> SingleSwapAverages:
    """``<alpha>`` and ``<p_s>`` after a single-photon swap, averaged over ``n_dif``.

    The late link keeps ``alpha0``; the early one holds ``alpha0 * exp(-n_dif r)``.
    """
    _check_p0(p0)
    c = 1.0 - alpha0 * eta_d
    avg_ps = alpha0 * eta_d / 2.0 * (1.0 + c * expected_decay_factor(p0, r, 1))
    if r == 0.0 or p0 == 1.0:
        return SingleSwapAverages(avg_alpha=alpha0 / (1.0 + c), avg_ps=avg_ps)

    def f(n: np.ndarray) -> np.ndarray:
        x = np.exp(-n * r)
        return alpha0 * x / (1.0 + c * x)

    # cost of the direct sum: weights die after ~N_mass terms, f after ~log(1/tol)/r
    n_needed = min(ndif_truncation(p0), math.log(1.0 / SUM_TOL) / r)
    avg_alpha = None
    if n_needed > _DIRECT_SUM_LIMIT:
        avg_alpha = _avg_alpha_series(alpha0, c, p0, r, SUM_TOL)
    if avg_alpha is None:
        avg_alpha = ndif_average(f, p0, limit=0.0)
    return SingleSwapAverages(avg_alpha=avg_alpha, avg_ps=avg_ps)


def avg_swap_two_photon(p0: float, alpha0: float, eta_d: float, r: float) -> float:
    """``<p_s>`` for two-photon BSM; both early memories decay."""
    return eta_d**2 * alpha0**2 * expected_decay_factor(p0, r, 2) / 2.0


class BetaAssumption(enum.Enum):
    BETA_ONE = "beta≈1"
    BOUNDS_MIDPOINT = "bounds-midpoint"


@dataclass(frozen=True)
class RateResult:
    """Entanglement distribution time (EDT) and rate.

    lower == mid == upper when the formula is exact.  ``below_threshold`` marks
    results whose EDT is not representable (p0 or <p_s> underflowed); their
    EDT fields are inf and rate_hz is 0.
    """

    edt_lower_s: float
    edt_mid_s: float
    edt_upper_s: float
    rate_hz: float
    final_alpha: float
    beta_assumption: BetaAssumption
    p0: float
    avg_ps: float
    avg_swap_alpha: float
    postselected: bool = False
    below_threshold: bool = False

    def to_dict(self) -> dict:
        return {
            "edt_lower_s": self.edt_lower_s,
            "edt_mid_s": self.edt_mid_s,
            "edt_upper_s": self.edt_upper_s,
            "rate_hz": self.rate_hz,
            "final_alpha": self.final_alpha,
            "beta_assumption": self.beta_assumption.value,
            "p0": self.p0,
            "avg_ps": self.avg_ps,
            "avg_swap_alpha": self.avg_swap_alpha,
            "postselected": self.postselected,
            "below_threshold": self.below_threshold,
        }


def _finish(lower, mid, upper, *, alpha, beta, p0, avg_ps, swap_alpha, postselected=False) -> RateResult:
    bad = not (math.isfinite(upper) and math.isfinite(lower) and mid > 0.0)
    if bad:
        inf = math.inf
        return RateResult(inf, inf, inf, 0.0, alpha, beta, p0, avg_ps, swap_alpha, postselected, True)
    return RateResult(lower, mid, upper, 1.0 / mid, alpha, beta, p0, avg_ps, swap_alpha, postselected, False)


def _safe_div(a: float, b: float) -> float:
    return a / b if b > 0.0 else math.inf


def edt_two_link(params: SchemeParams) -> RateResult:
    """EDT of one two-link chain.

    Single-photon BSM: ``<n_max> T0 / <p_s>``.  Two-photon BSM: bounds
    ``<n_min> T0/<p_s>`` and ``<n_max> T0/<p_s>``, reported at their midpoint
    ``T0 / (p0 <p_s>)``.
    """
    gen = generation(params)
    t0, r = params.t0_s, params.r
    if gen.p0 <= 0.0:
        return _finish(math.inf, math.inf, math.inf, alpha=0.0, beta=BetaAssumption.BETA_ONE,
                       p0=gen.p0, avg_ps=0.0, swap_alpha=0.0)
    stats = attempt_expectations(gen.p0, r)
    if params.scheme.single_photon_bsm:
        avg = avg_swap_single(gen.p0, gen.alpha0, params.eta_d, r)
        edt = _safe_div(stats.exp_n_max * t0, avg.avg_ps)
        return _finish(edt, edt, edt, alpha=avg.avg_alpha, beta=BetaAssumption.BETA_ONE,
                       p0=gen.p0, avg_ps=avg.avg_ps, swap_alpha=avg.avg_alpha)
    ps = avg_swap_two_photon(gen.p0, gen.alpha0, params.eta_d, r)
    lower = _safe_div(stats.exp_n_min * t0, ps)
    upper = _safe_div(stats.exp_n_max * t0, ps)
    mid = _safe_div(t0, gen.p0 * ps)
    return _finish(lower, mid, upper, alpha=1.0, beta=BetaAssumption.BOUNDS_MIDPOINT,
                   p0=gen.p0, avg_ps=ps, swap_alpha=1.0)


def edt_postselected(params: SchemeParams) -> RateResult:
    """EDT including postselection over two parallel two-link chains.

    Each chain's establish time is modeled as ``m T0`` with ``m`` geometric at
    ``p0' = 2 p0 <p_s> / 3``.  Postselection succeeds with probability
    ``<alpha>^2 <exp(-T_dif r)>``;  the result is the midpoint of the
    ``<T_min>`` and ``<T_max>`` bounds.
    """
    if not params.scheme.single_photon_bsm:
        raise SchemeMismatchError(f"postselection applies to single-photon BSM schemes, not {params.scheme.value!r}")
    gen = generation(params)
    t0, r = params.t0_s, params.r
    if gen.p0 <= 0.0:
        return _finish(math.inf, math.inf, math.inf, alpha=1.0, beta=BetaAssumption.BOUNDS_MIDPOINT,
                       p0=gen.p0, avg_ps=0.0, swap_alpha=0.0, postselected=True)
    avg = avg_swap_single(gen.p0, gen.alpha0, params.eta_d, r)
    p0_chain = 2.0 * gen.p0 * avg.avg_ps / 3.0
    if p0_chain <= 0.0:
        return _finish(math.inf, math.inf, math.inf, alpha=1.0, beta=BetaAssumption.BOUNDS_MIDPOINT,
                       p0=gen.p0, avg_ps=avg.avg_ps, swap_alpha=avg.avg_alpha, postselected=True)
    chain = attempt_expectations(p0_chain, r)
    p_ps = avg.avg_alpha**2 * expected_decay_factor(p0_chain, r, 1)
    t_min = chain.exp_n_min * t0
    t_max = chain.exp_n_max * t0
    lower = _safe_div(t_min, p_ps)
    upper = _safe_div(t_max, p_ps)
    mid = _safe_div(t_max + t_min, 2.0 * p_ps)
    return _finish(lower, mid, upper, alpha=1.0, beta=BetaAssumption.BOUNDS_MIDPOINT,
                   p0=gen.p0, avg_ps=avg.avg_ps, swap_alpha=avg.avg_alpha, postselected=True)


def rate(params: SchemeParams, postselect: bool | None = None) -> RateResult:
    """Headline rate: postselected for single-photon BSM, two-link otherwise."""
    if postselect is None:
        postselect = params.scheme.single_photon_bsm
    return edt_postselected(params) if postselect else edt_two_link(params)


def cutoff_avg_ps(p0: float, tau_m_s: float, t0_s: float, *, discrete: bool = False) -> float:
    """``<p_s>`` (unit prefactor) under a hard cutoff at ``tau_m / 2`` of waiting.

    ``discrete=False`` uses the continuous exponent ``tau_m / (2 T0)``.
    ``discrete=True`` sums the n_dif pmf exactly: success iff
    ``n_dif <= floor(tau_m / (2 T0))``.
    """
    _check_p0(p0)
    if math.isinf(tau_m_s):
        return 1.0
    ratio = tau_m_s / (2.0 * t0_s)
    if discrete:
        return 1.0 - ndif_tail_mass(math.floor(ratio) + 1, p0)
    if p0 == 1.0:
        return 1.0
    return 1.0 - 2.0 * math.exp(ratio * math.log1p(-p0)) / (2.0 - p0)


def exponential_avg_ps(p0: float, r: float, multiplicity: int = 1) -> float:
    """``<p_s>`` (unit prefactor) under exponential decay."""
    return expected_decay_factor(p0, r, multiplicity)
