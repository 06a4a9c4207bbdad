"""Exact binomial tail coefficients and the analytic moments they drive.

``delta(k, a)`` is the expected median score of ``k`` Bernoulli(a)
replicates (ties count one half) and ``gamma(k, a)`` its variance. Dataset
averages of both give closed forms for the bias and variance of the
average- and median-based prevalence estimators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from .data import ModelParams, ReplicateDataset
from .errors import DomainError


@dataclass(frozen=True)
class DeltaGamma:
    u: float
    v: float
    delta: float
    gamma: float


def binom_pmf(k: int, a: float) -> list[float]:
    """Bin(k, a) probabilities for 0..k via log-gamma."""
    la, l1a = math.log(a), math.log1p(-a)
    lk = math.lgamma(k + 1)
    return [
        math.exp(lk - math.lgamma(j + 1) - math.lgamma(k - j + 1) + j * la + (k - j) * l1a)
        for j in range(k + 1)
    ]


def _tail_sum(terms: list[float]) -> float:
    return math.fsum(sorted(terms))


@lru_cache(maxsize=4096)
def delta_gamma(k: int, a: float) -> DeltaGamma:
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    if not 0.0 < a < 1.0:
        raise DomainError(f"a must lie in (0, 1), got {a}")
    pmf = binom_pmf(k, a)
    # strict majority starts at floor(k/2) + 1
    # log-gamma rounding can push a near-certain tail a few ulps past 1
    u = min(_tail_sum(pmf[k // 2 + 1:]), 1.0)
    v = min(pmf[k // 2], 1.0) if k % 2 == 0 else 0.0
    delta = u + v / 2
    gamma = max(u * (1 - u) + v * (1 - v) / 4 - u * v, 0.0)
    return DeltaGamma(u, v, delta, gamma)


def delta(k: int, a: float) -> float:
    return delta_gamma(int(k), float(a)).delta


def gamma(k: int, a: float) -> float:
    return delta_gamma(int(k), float(a)).gamma


def _ns(data) -> np.ndarray:
    if isinstance(data, ReplicateDataset):
        return data.n
    return np.asarray(data, dtype=np.int64)


@dataclass(frozen=True)
class DatasetCoefficients:
    """Per-dataset averages of delta and gamma plus the harmonic mean of n."""

    ns: tuple[int, ...]

    @classmethod
    def of(cls, data) -> "DatasetCoefficients":
        return cls(tuple(int(v) for v in _ns(data)))

    def delta_bar(self, a: float) -> float:
        return float(np.mean([delta(k, a) for k in self.ns]))

    def gamma_bar(self, a: float) -> float:
        return float(np.mean([gamma(k, a) for k in self.ns]))

    @property
    def n_tilde(self) -> float:
        return len(self.ns) / sum(1.0 / k for k in self.ns)


class ScoreMoments(NamedTuple):
    cond_mean_given_T0: float
    cond_mean_given_T1: float
    mean: float
    variance: float


def score_moments(params: ModelParams, n: int, method: str) -> ScoreMoments:
    """Conditional means, marginal mean and marginal variance of one score."""
    th, p, q = params.as_tuple()
    if method == "A":
        m0, m1 = p, 1 - q
        v0, v1 = p * (1 - p) / n, q * (1 - q) / n
    elif method == "M":
        m0, m1 = delta(n, p), delta(n, 1 - q)
        v0, v1 = gamma(n, p), gamma(n, 1 - q)
    else:
        raise ValueError(f"method must be 'A' or 'M', got {method!r}")
    mean = th * m1 + (1 - th) * m0
    var = th * (1 - th) * (m1 - m0) ** 2 + th * v1 + (1 - th) * v0
    return ScoreMoments(m0, m1, mean, var)


class PrevalenceMoments(NamedTuple):
    expected_value: float
    bias: float
    variance: float


def prevalence_moments(params: ModelParams, data, method: str) -> PrevalenceMoments:
    """Mean, bias and variance of the empirical-mean prevalence estimator.

    ``data`` is a dataset or a sequence of replicate counts. The variance is
    the exact variance of a mean of independent scores with the given counts,
    i.e. the average of the per-individual variances divided by N.
    """
    ns = _ns(data)
    th, p, q = params.as_tuple()
    N = len(ns)
    if method == "A":
        expected = th * (1 - q) + (1 - th) * p
        n_tilde = DatasetCoefficients.of(ns).n_tilde
        var = (th * (1 - th) * (1 - q - p) ** 2 + th * q * (1 - q) / n_tilde + (1 - th) * p * (1 - p) / n_tilde) / N
    elif method == "M":
        coeffs = DatasetCoefficients.of(ns)
        expected = th * (1 - coeffs.delta_bar(q)) + (1 - th) * coeffs.delta_bar(p)
        gap_sq = np.mean([(1 - delta(k, q) - delta(k, p)) ** 2 for k in ns])
        var = (th * (1 - th) * gap_sq + th * coeffs.gamma_bar(1 - q) + (1 - th) * coeffs.gamma_bar(p)) / N
    else:
        raise ValueError(f"method must be 'A' or 'M', got {method!r}")
    return PrevalenceMoments(expected, expected - th, float(var))


def prevalence_bias(theta: float, p: float, q: float, ns, method: str) -> float:
    """Affine bias line of the A or M prevalence estimator, evaluated at ``theta``."""
    if method == "A":
        dp, dq = p, q
    else:
        c = DatasetCoefficients.of(ns)
        dp, dq = c.delta_bar(p), c.delta_bar(q)
    return dp - theta * (dp + dq)


@dataclass(frozen=True)
class BiasInterval:
    """Range of prevalences where the median estimator has the larger |bias|.

    ``equal_everywhere`` flags the degenerate case (all n_i <= 2) where both
    bias lines coincide and no such range exists.
    """

    lower: float
    upper: float
    equal_everywhere: bool = False

    @property
    def length(self) -> float:
        return 0.0 if self.equal_everywhere else self.upper - self.lower

    def __contains__(self, theta: float) -> bool:
        return not self.equal_everywhere and self.lower <= theta <= self.upper


def bias_dominance_interval(p: float, q: float, ns: Sequence[int], grid_step: float = 1e-3,
                            xtol: float = 1e-10) -> BiasInterval:
    """Locate J = {theta : |bias_M(theta)| > |bias_A(theta)|} by grid scan and bisection."""
    if not (0 < p < 0.5 and 0 < q < 0.5):
        raise DomainError("p and q must lie in (0, 1/2)")
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    c = DatasetCoefficients.of(ns)
    dp, dq = c.delta_bar(p), c.delta_bar(q)
    if abs(dp - p) <= 1e-15 and abs(dq - q) <= 1e-15:
        return BiasInterval(float("nan"), float("nan"), equal_everywhere=True)

    def excess(theta):
        return abs(dp - theta * (dp + dq)) - abs(p - theta * (p + q))

    grid = np.arange(grid_step, 1.0, grid_step)
    inside = np.array([excess(t) > 0 for t in grid])
    if not inside.any():
        # both lines vanish at the same prevalence (p = q): J shrinks to that point
        zero = p / (p + q)
        return BiasInterval(zero, zero)
    # J is a single interval around the zero of the average-based bias
    idx = np.flatnonzero(inside)
    lo_i, hi_i = idx[0], idx[-1]

    def refine(a, b):
        # excess(a) and excess(b) have opposite signs
        fa = excess(a) > 0
        while b - a > xtol:
            m = 0.5 * (a + b)
            if (excess(m) > 0) == fa:
                a = m
            else:
                b = m
        return 0.5 * (a + b)

    lower = refine(grid[lo_i - 1], grid[lo_i]) if lo_i > 0 else refine(0.0, grid[0]) if excess(0.0) <= 0 else 0.0
    upper = refine(grid[hi_i], grid[hi_i + 1]) if hi_i + 1 < len(grid) else refine(grid[-1], 1.0) if excess(1.0) <= 0 else 1.0
    return BiasInterval(float(lower), float(upper))
