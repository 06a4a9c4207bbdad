"""Three-way decisions (0, indecisive 1/2, 1) from scores, and their risks.

Losses follow the table

    truth \\ decision   0    1/2   1
    0                  0    a     b
    1                  c    d     0
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .coeffs import binom_pmf
from .data import ModelParams
from .errors import DomainError, ValidationError
from .scoring import ScoreVector

DECISIONS = (0.0, 0.5, 1.0)
_MAX_DEN = 10**6


@dataclass(frozen=True)
class LossSpec:
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        if min(self.a, self.b, self.c, self.d) <= 0:
            raise ValueError("loss entries a, b, c, d must be positive")

    @classmethod
    def symmetric(cls, a: float) -> "LossSpec":
        """Unit error costs and indecision cost ``a``."""
        return cls(a, 1.0, 1.0, a)

    def table(self) -> np.ndarray:
        """Loss indexed by [truth, decision index] with decisions (0, 1/2, 1)."""
        return np.array([[0.0, self.a, self.b], [self.c, self.d, 0.0]])

    def risks(self, prob):
        """Expected loss of deciding 0, 1/2, 1 when P(T=1) = ``prob``."""
        prob = np.asarray(prob, dtype=float)
        return np.stack([self.c * prob, self.a + (self.d - self.a) * prob, self.b * (1 - prob)])


@dataclass(frozen=True)
class ThresholdPair:
    v_L: float
    v_U: float

    def __post_init__(self):
        # optimal thresholds for asymmetric losses need not bracket 1/2
        if not 0 < self.v_L <= self.v_U < 1:
            raise DomainError(f"thresholds must satisfy 0 < v_L <= v_U < 1, got ({self.v_L}, {self.v_U})")

    @property
    def brackets_half(self) -> bool:
        """v_L <= 1/2 <= v_U, under which a score of exactly 1/2 is always indecisive."""
        return self.v_L <= 0.5 <= self.v_U

    @classmethod
    def symmetric(cls, a: float) -> "ThresholdPair":
        return cls(a, 1 - a)


@dataclass(frozen=True)
class NoIndecisionRegion:
    """The loss makes indecision never optimal; decide 1 above ``cut``, else 0."""

    cut: float


def optimal_thresholds(loss: LossSpec) -> ThresholdPair | NoIndecisionRegion:
    a, b, c, d = loss.a, loss.b, loss.c, loss.d
    slope = d - a
    if b * c / (b + c) > a + slope * b / (b + c) and -b < slope < c:
        return ThresholdPair(a / (c - slope), (b - a) / (slope + b))
    return NoIndecisionRegion(b / (b + c))


def delta0(n0: int) -> float:
    """Half-width around 1/2 inside which A and M classifications coincide for all n_i <= n0."""
    return 1 / (2 * n0) if n0 % 2 else 1 / (2 * (n0 - 1))


def _as_fraction(x: float) -> Fraction:
    return Fraction(x).limit_denominator(_MAX_DEN)


@dataclass(frozen=True)
class Classification:
    decisions: np.ndarray
    method: str
    thresholds: ThresholdPair

    def __len__(self):
        return len(self.decisions)


def phi(y, v_L: float, v_U: float) -> np.ndarray:
    """0 below v_L, 1 above v_U, 1/2 in between (inclusive)."""
    y = np.asarray(y, dtype=float)
    return np.where(y < v_L, 0.0, np.where(y > v_U, 1.0, 0.5))


def classify(scores: ScoreVector, thresholds: ThresholdPair) -> Classification:
    """Apply the three-way rule; rational scores are compared exactly."""
    if scores.exact:
        num = np.asarray(scores.num, dtype=np.int64)
        den = np.asarray(scores.den, dtype=np.int64)
        lo, hi = _as_fraction(thresholds.v_L), _as_fraction(thresholds.v_U)
        below = num * lo.denominator < lo.numerator * den
        above = num * hi.denominator > hi.numerator * den
        dec = np.where(below, 0.0, np.where(above, 1.0, 0.5))
    else:
        dec = phi(scores.scores, thresholds.v_L, thresholds.v_U)
    return Classification(dec, scores.method, thresholds)


def _truth(truth) -> np.ndarray:
    t = np.asarray(truth, dtype=object)
    missing = [i for i, v in enumerate(t) if v is None]
    if missing:
        raise ValidationError(f"truth missing for individuals at positions {missing}")
    t = t.astype(np.int64)
    if np.any((t != 0) & (t != 1)):
        raise ValidationError("truth values must be 0 or 1")
    return t


def _decision_index(decisions) -> np.ndarray:
    return np.rint(np.asarray(decisions, dtype=float) * 2).astype(np.int64)


def empirical_risk(classification: Classification | np.ndarray, truth, loss: LossSpec,
                   mode: str = "total") -> float:
    dec = classification.decisions if isinstance(classification, Classification) else classification
    t = _truth(truth)
    if len(t) != len(dec):
        raise ValidationError("truth and decisions differ in length")
    total = float(loss.table()[t, _decision_index(dec)].sum())
    if mode == "total":
        return total
    if mode == "mean":
        return total / len(t)
    raise ValueError("mode must be 'total' or 'mean'")


def confusion_table(classification: Classification | np.ndarray, truth) -> np.ndarray:
    """2x3 integer counts: rows truth 0/1, columns decisions 0, 1/2, 1."""
    dec = classification.decisions if isinstance(classification, Classification) else classification
    t = _truth(truth)
    table = np.zeros((2, 3), dtype=np.int64)
    np.add.at(table, (t, _decision_index(dec)), 1)
    return table


def write_confusion_csv(tables: dict[str, np.ndarray], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "status", "decision_0", "decision_half", "decision_1"])
        for method, tab in tables.items():
            for status in (0, 1):
                w.writerow([method, status, *tab[status].tolist()])


def sensitivity_specificity(params: ModelParams, n: int, thresholds: ThresholdPair,
                            method: str) -> tuple[float, float]:
    """Exact P(decide 1 | T=1) and P(decide 0 | T=0) for one individual with n replicates."""
    s = np.arange(n + 1)
    if method == "A":
        hi, lo = _as_fraction(thresholds.v_U), _as_fraction(thresholds.v_L)
        pos = s * hi.denominator > hi.numerator * n
        neg = s * lo.denominator < lo.numerator * n
    elif method == "M":
        pos = 2 * s > n
        neg = 2 * s < n
    else:
        raise ValueError("method must be 'A' or 'M'")
    pmf1 = np.array(binom_pmf(n, 1 - params.q))
    pmf0 = np.array(binom_pmf(n, params.p))
    return float(pmf1[pos].sum()), float(pmf0[neg].sum())
