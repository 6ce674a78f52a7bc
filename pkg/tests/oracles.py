"""Brute-force reference computations, written independently of qrepeater.analytic."""

import math

import numpy as np


def geometric_support(p0: float, tail: float = 1e-16) -> np.ndarray:
    """Attempt counts 1..N with P(n > N) below ``tail``."""
    if p0 == 1.0:
        return np.array([1])
    n_max = int(math.ceil(math.log(tail) / math.log1p(-p0))) + 1
    return np.arange(1, n_max + 1)


def geometric_pmf(p0: float, n: np.ndarray) -> np.ndarray:
    return p0 * (1.0 - p0) ** (n - 1)


def pair_expectations(p0: float, rows_per_chunk: int = 512) -> dict[str, float]:
    """<n_max>, <n_min>, <n_dif> by explicit double sum over (n1, n2)."""
    n = geometric_support(p0)
    w = geometric_pmf(p0, n)
    acc = {"n_max": [], "n_min": [], "n_dif": [], "mass": []}
    for start in range(0, n.size, rows_per_chunk):
        n1 = n[start:start + rows_per_chunk, None]
        w12 = w[start:start + rows_per_chunk, None] * w[None, :]
        acc["n_max"].append(float(np.sum(w12 * np.maximum(n1, n[None, :]))))
        acc["n_min"].append(float(np.sum(w12 * np.minimum(n1, n[None, :]))))
        acc["n_dif"].append(float(np.sum(w12 * np.abs(n1 - n[None, :]))))
        acc["mass"].append(float(np.sum(w12)))
    return {k: math.fsum(v) for k, v in acc.items()}


def ndif_pmf_by_convolution(p0: float) -> np.ndarray:
    """pmf of |n1 - n2| by correlating two truncated geometric pmfs."""
    n = geometric_support(p0)
    w = geometric_pmf(p0, n)
    corr = np.correlate(w, w, mode="full")  # index k <-> n1 - n2 = k - (N - 1)
    mid = n.size - 1
    pmf = corr[mid:].copy()
    pmf[1:] += corr[:mid][::-1]
    return pmf


def ndif_pmf_formula(p0: float, n: np.ndarray) -> np.ndarray:
    """Closed-form pmf of |n1 - n2| written out directly."""
    out = 2.0 * p0 * (1.0 - p0) ** n / (2.0 - p0)
    return np.where(n == 0, p0 / (2.0 - p0), out)


def decay_sum(p0: float, r: float, m: int, tail: float = 1e-17) -> float:
    """Truncated sum over n_dif of pmf * exp(-m n r)."""
    if p0 == 1.0:
        return 1.0
    n_max = int(math.ceil(math.log(tail) / math.log1p(-p0))) + 1
    n = np.arange(0, n_max + 1)
    return math.fsum(ndif_pmf_formula(p0, n) * np.exp(-m * n * r))
