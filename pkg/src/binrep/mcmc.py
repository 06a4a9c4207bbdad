"""Gibbs sampling of the Bayesian latent-class model.

Given the latent states, every parameter has a conjugate (truncated) Beta
full conditional, and given the parameters the latent states are independent
Bernoulli draws. The sampler alternates these blocks:

    T_i   | theta, p, q, S   ~ Ber(P(T_i = 1 | S_i))
    theta | T                ~ Beta(a_T + sum T, b_T + N - sum T)
    p     | T, S             ~ Beta(a_FP + sum_{T=0} s, b_FP + sum_{T=0} (n - s)) on (0, 1/2)
    q     | T, S             ~ Beta(a_FN + sum_{T=1} (n - s), b_FN + sum_{T=1} s) on (0, 1/2)

Chains advance in lockstep as array rows, which also lets the simulation
harness push many independent datasets through one vectorised loop. Each
chain draws its uniforms from its own stream in fixed-size blocks, so a
chain's output does not depend on what else is in the batch.
"""

from __future__ import annotations

import csv
import json
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import betainc, betaincinv, expit

from . import _rng
from .data import ReplicateDataset
from .errors import NumericalError
from .scoring import ScoreVector

log = logging.getLogger(__name__)

_BLOCK = 64
_TINY_MASS = 1e-300


@dataclass(frozen=True)
class PriorSpec:
    a_T: float = 0.5
    b_T: float = 0.5
    a_FP: float = 2.0
    b_FP: float = 2.0
    a_FN: float = 2.0
    b_FN: float = 2.0

    def __post_init__(self):
        for name, value in self.as_dict().items():
            if not value > 0:
                raise ValueError(f"prior hyperparameter {name} must be positive, got {value}")

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in ("a_T", "b_T", "a_FP", "b_FP", "a_FN", "b_FN")}

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(self.as_dict().values())


def default_prior() -> PriorSpec:
    return PriorSpec(0.5, 0.5, 2.0, 2.0, 2.0, 2.0)


def misguided_prior() -> PriorSpec:
    return PriorSpec(0.5, 0.5, 50.0, 50.0, 50.0, 50.0)


def load_prior(spec: str) -> PriorSpec:
    """``default``, ``misguided`` or a path to a JSON object with the six hyperparameters."""
    if spec == "default":
        return default_prior()
    if spec == "misguided":
        return misguided_prior()
    with open(spec, encoding="utf-8") as fh:
        return PriorSpec(**{k: float(v) for k, v in json.load(fh).items()})


def truncated_beta_ppf(u, a, b, upper: float = 0.5, name: str = "parameter"):
    """Inverse-CDF draw from Beta(a, b) restricted to (0, upper).

    ``u`` are uniforms on (0, 1); the draw is F^{-1}(u * F(upper)).
    """
    mass = betainc(a, b, upper)
    if np.any(mass < _TINY_MASS):
        raise NumericalError(f"truncated Beta for {name}: mass below {upper} underflows")
    x = betaincinv(a, b, u * mass)
    # betaincinv can round onto the boundary when almost all mass sits near it
    return np.clip(x, np.nextafter(0.0, 1.0), np.nextafter(upper, 0.0))


@dataclass
class _Batch:
    """Padded per-chain data for the lockstep sampler."""

    n: np.ndarray      # (C, Nmax) float, zero where padded
    s: np.ndarray
    mask: np.ndarray   # (C, Nmax) bool
    size: np.ndarray   # (C,) number of individuals

    @classmethod
    def from_datasets(cls, datasets):
        nmax = max(len(d) for d in datasets)
        C = len(datasets)
        n = np.zeros((C, nmax))
        s = np.zeros((C, nmax))
        mask = np.zeros((C, nmax), dtype=bool)
        for c, d in enumerate(datasets):
            k = len(d)
            n[c, :k], s[c, :k], mask[c, :k] = d.n, d.s, True
        return cls(n, s, mask, mask.sum(axis=1))


@dataclass
class _GibbsOutput:
    theta: np.ndarray       # (C, H)
    p: np.ndarray
    q: np.ndarray
    t_sum: np.ndarray       # (C, Nmax) count of retained draws with T_i = 1
    t_draws: np.ndarray | None  # (C, H, Nmax) bool when kept


def _gibbs_lockstep(datasets, prior: PriorSpec, rngs, iters: int, burnin: int,
                    keep_states: bool = False) -> _GibbsOutput:
    batch = _Batch.from_datasets(datasets)
    C, nmax = batch.n.shape
    H = iters - burnin
    a_T, b_T, a_FP, b_FP, a_FN, b_FN = prior.as_tuple()
    n, s, mask = batch.n, batch.s, batch.mask
    fail = n - s

    # initial parameters from the (truncated) prior
    u0 = np.stack([g.random(3) for g in rngs])
    theta = betaincinv(a_T, b_T, u0[:, 0])
    p = truncated_beta_ppf(u0[:, 1], a_FP, b_FP, name="p")
    q = truncated_beta_ppf(u0[:, 2], a_FN, b_FN, name="q")

    out_theta = np.empty((C, H))
    out_p = np.empty((C, H))
    out_q = np.empty((C, H))
    t_sum = np.zeros((C, nmax))
    t_draws = np.empty((C, H, nmax), dtype=bool) if keep_states else None

    width = nmax + 3
    block = None
    for it in range(iters):
        j = it % _BLOCK
        if j == 0:
            rows = min(_BLOCK, iters - it)
            # each chain consumes exactly its own N + 3 uniforms per sweep, so a
            # dataset's draws do not depend on what it is batched with
            block = np.zeros((rows, C, width))
            for c, g in enumerate(rngs):
                k = int(batch.size[c])
                raw = g.random((rows, k + 3))
                block[:, c, :k] = raw[:, :k]
                block[:, c, nmax:] = raw[:, k:]
        u = block[j]
        eta = (np.log(theta) - np.log1p(-theta))[:, None] \
            + s * (np.log1p(-q) - np.log(p))[:, None] \
            + fail * (np.log(q) - np.log1p(-p))[:, None]
        T = (u[:, :nmax] < expit(eta)) & mask
        k1 = T.sum(axis=1)
        s1 = (s * T).sum(axis=1)
        f1 = (fail * T).sum(axis=1)
        s0 = s.sum(axis=1) - s1
        f0 = fail.sum(axis=1) - f1
        theta = betaincinv(a_T + k1, b_T + batch.size - k1, u[:, nmax])
        theta = np.clip(theta, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
        p = truncated_beta_ppf(u[:, nmax + 1], a_FP + s0, b_FP + f0, name="p")
        q = truncated_beta_ppf(u[:, nmax + 2], a_FN + f1, b_FN + s1, name="q")
        h = it - burnin
        if h >= 0:
            out_theta[:, h], out_p[:, h], out_q[:, h] = theta, p, q
            t_sum += T
            if keep_states:
                t_draws[:, h] = T
    return _GibbsOutput(out_theta, out_p, out_q, t_sum, t_draws)


@dataclass(frozen=True)
class PosteriorSample:
    """Retained draws, shaped (chains, draws per chain)."""

    theta: np.ndarray
    p: np.ndarray
    q: np.ndarray
    T: np.ndarray | None        # (chains, draws, N) latent states, bool
    t_mean: np.ndarray           # (N,) fraction of retained draws with T_i = 1
    seed: int
    chains: int
    iters: int
    burnin: int

    @property
    def size(self) -> int:
        return self.theta.size

    def flat(self):
        return self.theta.ravel(), self.p.ravel(), self.q.ravel()

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["chain", "iter", "theta", "p", "q"])
            for c in range(self.chains):
                for h in range(self.theta.shape[1]):
                    w.writerow([c, self.burnin + h, repr(float(self.theta[c, h])),
                                repr(float(self.p[c, h])), repr(float(self.q[c, h]))])


def gibbs_run(data: ReplicateDataset, prior: PriorSpec | None = None, chains: int = 4, iters: int = 5000,
              burnin: int = 1000, seed: int = 0, keep_states: bool = True) -> PosteriorSample:
    if iters <= burnin:
        raise ValueError("iters must exceed burnin")
    if burnin < 0 or chains < 1:
        raise ValueError("need burnin >= 0 and chains >= 1")
    prior = prior or default_prior()
    rngs = [_rng.stream(seed, 1, c) for c in range(chains)]
    out = _gibbs_lockstep([data] * chains, prior, rngs, iters, burnin, keep_states)
    sample = PosteriorSample(
        theta=out.theta, p=out.p, q=out.q,
        T=out.t_draws,
        t_mean=out.t_sum.sum(axis=0) / out.theta.size,
        seed=seed, chains=chains, iters=iters, burnin=burnin,
    )
    if chains > 1:
        for name in ("theta", "p", "q"):
            r = split_rhat(getattr(sample, name))
            if r > 1.05:
                warnings.warn(f"potential scale reduction for {name} is {r:.3f} > 1.05", RuntimeWarning,
                              stacklevel=2)
    return sample


def gibbs_many(datasets, prior: PriorSpec, seeds, chains: int = 4, iters: int = 5000, burnin: int = 1000):
    """Posterior samples for several datasets in one vectorised run.

    Chain ``c`` of dataset ``k`` uses the same stream as
    ``gibbs_run(datasets[k], seed=seeds[k])``; latent states are not kept.
    """
    if iters <= burnin:
        raise ValueError("iters must exceed burnin")
    expanded = [d for d in datasets for _ in range(chains)]
    rngs = [_rng.stream(sd, 1, c) for sd in seeds for c in range(chains)]
    out = _gibbs_lockstep(expanded, prior, rngs, iters, burnin, keep_states=False)
    samples = []
    for k, (d, sd) in enumerate(zip(datasets, seeds)):
        sl = slice(k * chains, (k + 1) * chains)
        H = out.theta[sl].size
        samples.append(PosteriorSample(
            theta=out.theta[sl], p=out.p[sl], q=out.q[sl], T=None,
            t_mean=out.t_sum[sl, :len(d)].sum(axis=0) / H,
            seed=sd, chains=chains, iters=iters, burnin=burnin,
        ))
    return samples


def split_rhat(draws: np.ndarray) -> float:
    """Split-chain potential scale reduction for draws shaped (chains, H)."""
    draws = np.atleast_2d(draws)
    half = draws.shape[1] // 2
    if half < 2:
        return float("nan")
    parts = np.concatenate([draws[:, :half], draws[:, half:2 * half]])
    m = parts.mean(axis=1)
    w = parts.var(axis=1, ddof=1).mean()
    b = half * m.var(ddof=1)
    if w == 0:
        return 1.0 if b == 0 else float("inf")
    var_plus = (half - 1) / half * w + b / half
    return float(np.sqrt(var_plus / w))


def batch_means_se(draws: np.ndarray, batches: int = 20) -> float:
    """Monte-Carlo standard error of the overall mean via per-chain batch means."""
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    H = draws.shape[1]
    size = H // batches
    if size < 1:
        raise ValueError("not enough draws for the requested number of batches")
    means = draws[:, :size * batches].reshape(draws.shape[0], batches, size).mean(axis=2).ravel()
    return float(means.std(ddof=1) / np.sqrt(means.size))


@dataclass(frozen=True)
class PosteriorSummary:
    mean_theta: float
    mean_p: float
    mean_q: float
    ci_theta: tuple[float, float]
    ci_p: tuple[float, float]
    ci_q: tuple[float, float]
    bayes_scores: ScoreVector
    level: float


def summarize(sample: PosteriorSample, level: float = 0.95) -> PosteriorSummary:
    if sample.size == 0:
        raise ValueError("empty posterior sample")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    lo, hi = (1 - level) / 2, 1 - (1 - level) / 2
    theta, p, q = sample.flat()

    def ci(x):
        a, b = np.quantile(x, [lo, hi])
        return float(a), float(b)

    return PosteriorSummary(
        mean_theta=float(theta.mean()), mean_p=float(p.mean()), mean_q=float(q.mean()),
        ci_theta=ci(theta), ci_p=ci(p), ci_q=ci(q),
        bayes_scores=ScoreVector("B", np.clip(sample.t_mean, 0.0, 1.0)),
        level=level,
    )
