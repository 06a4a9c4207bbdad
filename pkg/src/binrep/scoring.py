"""Per-individual scores and the penalized EM fit behind the MAP score."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from . import _rng
from .data import ModelParams, ReplicateDataset
from .errors import DomainError, NumericalError

log = logging.getLogger(__name__)

METHODS = ("A", "M", "MAP", "B")

# EM keeps p, q inside [EPS, 1/2 - EPS] and theta inside [EPS, 1 - EPS]
EPS = 1e-12


@dataclass(frozen=True)
class ScoreVector:
    """Scores aligned with dataset order.

    ``num``/``den`` carry the exact rational value of each score when one
    exists (average and median scores), so that threshold comparisons can be
    made without rounding.
    """

    method: str
    scores: np.ndarray
    num: np.ndarray | None = None
    den: np.ndarray | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown score method {self.method!r}")
        y = np.asarray(self.scores, dtype=float)
        if y.ndim != 1 or np.any((y < 0) | (y > 1)) or not np.all(np.isfinite(y)):
            raise DomainError("scores must be finite values in [0, 1]")
        object.__setattr__(self, "scores", y)

    def __len__(self):
        return len(self.scores)

    @property
    def exact(self) -> bool:
        return self.num is not None


def score_average(data: ReplicateDataset) -> ScoreVector:
    n, s = data.n, data.s
    return ScoreVector("A", s / n, num=s.copy(), den=n.copy())


def score_median(data: ReplicateDataset) -> ScoreVector:
    n, s = data.n, data.s
    # 2s vs n decides majority; tie only when n is even
    num = np.sign(2 * s - n) + 1
    return ScoreVector("M", num / 2.0, num=num, den=np.full_like(n, 2))


def _check_h1(theta, p, q):
    if not 0.0 <= theta <= 1.0:
        raise DomainError(f"theta_T must lie in [0, 1], got {theta}")
    if not 0.0 < p < 0.5 or not 0.0 < q < 0.5:
        raise DomainError(f"p and q must lie in (0, 1/2), got p={p}, q={q}")


def likelihood_logit(n, s, theta, p, q):
    """Log-odds of T=1 given S=s; broadcasts over arrays."""
    n = np.asarray(n, dtype=float)
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore"):
        prior = np.log(theta) - np.log1p(-theta)
    return prior + s * (np.log1p(-q) - np.log(p)) + (n - s) * (np.log(q) - np.log1p(-p))


def likelihood_score(n, s, theta: float, p: float, q: float) -> np.ndarray:
    """P(T=1 | S=s) under fixed parameters, computed in log-odds space."""
    _check_h1(theta, p, q)
    return expit(likelihood_logit(n, s, theta, p, q))


def score_likelihood(data: ReplicateDataset, params: ModelParams) -> ScoreVector:
    return ScoreVector("MAP", likelihood_score(data.n, data.s, *params.as_tuple()))


def log_posterior(data: ReplicateDataset, theta: float, p: float, q: float) -> float:
    """Beta(2,2)-penalized log-likelihood of (theta, p, q), binomial constants dropped."""
    return float(_log_posterior(data.n.astype(float), data.s.astype(float),
                                np.atleast_1d(theta), np.atleast_1d(p), np.atleast_1d(q))[0])


def _log_posterior(n, s, theta, p, q):
    # theta, p, q: shape (R,); n, s: shape (N,)
    th, p, q = theta[:, None], p[:, None], q[:, None]
    with np.errstate(divide="ignore"):
        comp1 = np.log(th) + s * np.log1p(-q) + (n - s) * np.log(q)
        comp0 = np.log1p(-th) + s * np.log(p) + (n - s) * np.log1p(-p)
    ll = logsumexp(np.stack([comp1, comp0]), axis=0).sum(axis=1)
    pen = np.log(p[:, 0]) + np.log1p(-p[:, 0]) + np.log(q[:, 0]) + np.log1p(-q[:, 0])
    return ll + pen


@dataclass(frozen=True)
class EmFitResult:
    params: ModelParams
    log_posterior: float
    responsibilities: np.ndarray
    restarts_used: int
    converged: tuple[bool, ...]
    iterations: tuple[int, ...]
    best_restart: int
    trace: tuple[float, ...] = ()


def _m_step(n, s, y):
    theta = y.mean(axis=1)
    p = (1 + (s * (1 - y)).sum(axis=1)) / (2 + (n * (1 - y)).sum(axis=1))
    q = (1 + ((n - s) * y).sum(axis=1)) / (2 + (n * y).sum(axis=1))
    return theta, p, q


def _repair(theta, p, q, y):
    """Undo label switching, then keep parameters in the admissible box.

    The swap (theta, p, q, y) -> (1-theta, 1-q, 1-p, 1-y) leaves the
    objective unchanged; it is applied when the positive component is the
    less positive one (p + q > 1), which is exactly when it can restore
    p, q < 1/2.
    """
    flip = p + q > 1
    if flip.any():
        theta = np.where(flip, 1 - theta, theta)
        p, q = np.where(flip, 1 - q, p), np.where(flip, 1 - p, q)
        y = np.where(flip[:, None], 1 - y, y)
    theta = np.clip(theta, EPS, 1 - EPS)
    p = np.clip(p, EPS, 0.5 - EPS)
    q = np.clip(q, EPS, 0.5 - EPS)
    return theta, p, q, y


def em_iterate(data: ReplicateDataset, y0: np.ndarray, max_iters: int = 500, tol: float = 1e-9,
               record_trace: bool = False):
    """Run EM from initial responsibilities ``y0`` of shape (R, N).

    All R starts advance together; a start stops updating once the relative
    change of its log-posterior falls below ``tol``. Returns
    ``(theta, p, q, y, logpost, converged, iterations, trace)``.
    """
    n = data.n.astype(float)[None, :]
    s = data.s.astype(float)[None, :]
    y = np.array(y0, dtype=float, ndmin=2)
    R = y.shape[0]
    active = np.ones(R, dtype=bool)
    converged = np.zeros(R, dtype=bool)
    iters = np.zeros(R, dtype=np.int64)
    theta = np.empty(R)
    p = np.empty(R)
    q = np.empty(R)
    lp = np.full(R, -np.inf)
    trace = []
    for it in range(max_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        th_a, p_a, q_a = _m_step(n, s, y[idx])
        th_a, p_a, q_a, y_a = _repair(th_a, p_a, q_a, y[idx])
        lp_a = _log_posterior(n[0], s[0], th_a, p_a, q_a)
        if not np.all(np.isfinite(lp_a)):
            bad = int(idx[~np.isfinite(lp_a)][0])
            raise NumericalError(f"non-finite log-posterior in EM restart {bad}")
        y_a = expit(likelihood_logit(n, s, th_a[:, None], p_a[:, None], q_a[:, None]))
        change = np.abs(lp_a - lp[idx]) / np.maximum(np.abs(lp_a), 1e-300)
        theta[idx], p[idx], q[idx], y[idx] = th_a, p_a, q_a, y_a
        lp[idx] = lp_a
        iters[idx] += 1
        if record_trace:
            trace.append(lp.copy())
        done = change < tol
        converged[idx[done]] = True
        active[idx[done]] = False
    return theta, p, q, y, lp, converged, iters, trace


def em_init(data: ReplicateDataset, restarts: int, seed: int) -> np.ndarray:
    """Initial responsibilities y_i ~ Beta(s_i + 1/2, n_i - s_i + 1/2), one stream per restart."""
    a = data.s + 0.5
    b = data.n - data.s + 0.5
    return np.stack([_rng.stream(seed, 0, r).beta(a, b) for r in range(restarts)])


def em_fit(data: ReplicateDataset, restarts: int = 20, seed: int = 0, max_iters: int = 500,
           tol: float = 1e-9, y0: np.ndarray | None = None, record_trace: bool = False) -> EmFitResult:
    """MAP estimate of (theta_T, p, q) by EM with random restarts.

    Each restart starts with an M-step from random responsibilities; the
    restart with the highest penalized log-posterior wins, the lowest index
    breaking ties. ``y0`` overrides the random initialisation.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    if y0 is None:
        y0 = em_init(data, restarts, seed)
    y0 = np.array(y0, dtype=float, ndmin=2)
    theta, p, q, y, lp, converged, iters, trace = em_iterate(data, y0, max_iters, tol, record_trace)
    best = int(np.argmax(lp))
    if not converged[best]:
        log.warning("EM restart %d hit max_iters=%d before converging", best, max_iters)
    return EmFitResult(
        params=ModelParams(float(theta[best]), float(p[best]), float(q[best])),
        log_posterior=float(lp[best]),
        responsibilities=y[best].copy(),
        restarts_used=y0.shape[0],
        converged=tuple(bool(c) for c in converged),
        iterations=tuple(int(i) for i in iters),
        best_restart=best,
        trace=tuple(float(t[best]) for t in trace),
    )


def score_map(data: ReplicateDataset, fit: EmFitResult) -> ScoreVector:
    return ScoreVector("MAP", likelihood_score(data.n, data.s, *fit.params.as_tuple()))
