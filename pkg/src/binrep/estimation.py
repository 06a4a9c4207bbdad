"""Prevalence and error-rate estimates from scores or posterior draws."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .data import ModelParams, ReplicateDataset
from .errors import DomainError, ValidationError
from .mcmc import PosteriorSummary
from .scoring import ScoreVector


@dataclass(frozen=True)
class EstimateSet:
    method: str
    theta_hat: float
    p_hat: float
    q_hat: float
    credible: dict[str, tuple[float, float]] | None = None

    def params(self) -> ModelParams:
        """As model parameters; raises DomainError when p or q leave (0, 1/2)."""
        return ModelParams(self.theta_hat, self.p_hat, self.q_hat)

    def to_json(self) -> str:
        d = asdict(self)
        if d["credible"] is None:
            d.pop("credible")
        else:
            d["ci"] = {k: list(v) for k, v in d.pop("credible").items()}
        return json.dumps(d)


def estimate(data: ReplicateDataset, scores: ScoreVector | np.ndarray, method: str | None = None) -> EstimateSet:
    """Score-weighted prevalence and error rates.

    ``scores`` may be a raw array (e.g. the known latent states), in which
    case ``method`` labels the result.
    """
    if isinstance(scores, ScoreVector):
        method = method or scores.method
        y = scores.scores
    else:
        y = np.asarray(scores, dtype=float)
        method = method or "latent"
    if len(y) != len(data):
        raise ValidationError("scores and dataset differ in length")
    n, s = data.n, data.s
    den_p = float(np.sum(n * (1 - y)))
    den_q = float(np.sum(n * y))
    if den_p == 0:
        raise DomainError("p_hat undefined: every score equals 1")
    if den_q == 0:
        raise DomainError("q_hat undefined: every score equals 0")
    return EstimateSet(
        method=method,
        theta_hat=float(y.mean()),
        p_hat=float(np.sum(s * (1 - y)) / den_p),
        q_hat=float(np.sum((n - s) * y) / den_q),
    )


def estimate_bayes(summary: PosteriorSummary) -> EstimateSet:
    """Posterior means, with the equal-tailed credible intervals attached."""
    return EstimateSet(
        method="B",
        theta_hat=summary.mean_theta,
        p_hat=summary.mean_p,
        q_hat=summary.mean_q,
        credible={"theta": summary.ci_theta, "p": summary.ci_p, "q": summary.ci_q},
    )
