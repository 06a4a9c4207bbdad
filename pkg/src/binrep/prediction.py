"""Scores and decisions for new individuals given a fitted model."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import expit

from .data import ModelParams
from .decision import ThresholdPair, phi
from .mcmc import PosteriorSample
from .scoring import likelihood_logit, likelihood_score


def _check_counts(n_new, s_new):
    n_new, s_new = np.asarray(n_new), np.asarray(s_new)
    if np.any(n_new < 1) or np.any(s_new < 0) or np.any(s_new > n_new):
        raise ValueError("need 0 <= s_new <= n_new and n_new >= 1")


def predict_plugin(n_new, s_new, params: ModelParams):
    """Plug-in predictive score; scalar in, scalar out."""
    _check_counts(n_new, s_new)
    y = likelihood_score(n_new, s_new, *params.as_tuple())
    return float(y) if np.ndim(y) == 0 else y


def predict_bayes(n_new, s_new, sample: PosteriorSample):
    """Posterior-averaged predictive score over the retained draws."""
    if sample.size == 0:
        raise ValueError("empty posterior sample")
    _check_counts(n_new, s_new)
    theta, p, q = sample.flat()
    n_new = np.asarray(n_new, dtype=float)
    s_new = np.asarray(s_new, dtype=float)
    eta = likelihood_logit(n_new[..., None], s_new[..., None], theta, p, q)
    y = expit(eta).mean(axis=-1)
    return float(y) if np.ndim(y) == 0 else y


@dataclass(frozen=True)
class PredictionTable:
    n: np.ndarray
    s: np.ndarray
    score: np.ndarray
    decision: np.ndarray

    def __len__(self):
        return len(self.n)

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "s", "score", "decision"])
            for row in zip(self.n.tolist(), self.s.tolist(), self.score.tolist(), self.decision.tolist()):
                w.writerow(row)


def prediction_table(n_max: int, predictor: ModelParams | PosteriorSample | Callable,
                     thresholds: ThresholdPair) -> PredictionTable:
    """Enumerate every (n, s) with 0 <= s <= n <= n_max."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    pairs = np.array([(n, s) for n in range(1, n_max + 1) for s in range(n + 1)])
    n, s = pairs[:, 0], pairs[:, 1]
    if isinstance(predictor, ModelParams):
        score = np.asarray(predict_plugin(n, s, predictor))
    elif isinstance(predictor, PosteriorSample):
        score = np.asarray(predict_bayes(n, s, predictor))
    else:
        score = np.asarray(predictor(n, s), dtype=float)
    return PredictionTable(n, s, score, phi(score, thresholds.v_L, thresholds.v_U))
