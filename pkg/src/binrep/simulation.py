"""Synthetic datasets and the experiment runners built on them.

Two generators are provided: the homogeneous latent-class model (one
prevalence, one pair of error rates) and a mammography-style reader study
in which every reader has its own error rates, the number of errors per
reader is fixed exactly, and harder patients attract errors through
weights.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _rng
from .data import RawReplicateTable, ReplicateDataset, reduce_to_sufficient
from .decision import LossSpec, ThresholdPair, classify, empirical_risk, phi
from .errors import DomainError, ValidationError
from .estimation import estimate
from .mcmc import PriorSpec, default_prior, gibbs_many, misguided_prior
from .prediction import predict_bayes, predict_plugin
from .scoring import ScoreVector, em_fit, score_average, score_map, score_median

BAYES_PRIORS = {"B": default_prior, "B-misguided": misguided_prior}
ALL_METHODS = ("A", "M", "MAP", "B")


@dataclass(frozen=True)
class SimConfig:
    theta_T: float = 0.4
    p: float = 0.1
    q: float = 0.05
    N: int = 200
    n_min: int = 2
    n_max: int = 6
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.theta_T <= 1:
            raise DomainError("theta_T must lie in [0, 1]")
        if not (0 < self.p < 0.5 and 0 < self.q < 0.5):
            raise DomainError("p and q must lie in (0, 1/2)")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not 1 <= self.n_min <= self.n_max <= 200:
            raise ValueError("replicate counts must satisfy 1 <= n_min <= n_max <= 200")


def simulate_dataset(cfg: SimConfig, rng: np.random.Generator | None = None) -> ReplicateDataset:
    """Draw T ~ Ber(theta), n ~ U{n_min..n_max}, S | T ~ Bin(n, T(1-q) + (1-T)p)."""
    rng = rng if rng is not None else _rng.stream(cfg.seed, 2)
    t = (rng.random(cfg.N) < cfg.theta_T).astype(np.int64)
    n = rng.integers(cfg.n_min, cfg.n_max + 1, size=cfg.N)
    s = rng.binomial(n, np.where(t == 1, 1 - cfg.q, cfg.p))
    return ReplicateDataset.from_counts(n, s, status=t)


# --- mammography-style reader study -------------------------------------------------

DEFAULT_MISSING = {"1201": (1, 0), "7714": (3, 5), "9007": (0, 1)}


def _default_reader_ids(k: int) -> tuple[str, ...]:
    special = list(DEFAULT_MISSING)
    return tuple(special + [f"r{j:03d}" for j in range(len(special) + 1, k + 1)])


@dataclass(frozen=True)
class MammoConfig:
    """Reader-study layout; rows are patients, columns are readers.

    ``missing`` maps a reader id to (missing positive exams, missing negative
    exams). Per-reader rates default to the homogeneous mean case.
    """

    n_negative: int = 84
    n_positive: int = 64
    n_readers: int = 110
    p_rates: tuple[float, ...] | None = None
    q_rates: tuple[float, ...] | None = None
    weights: tuple[float, ...] | None = None
    reader_ids: tuple[str, ...] | None = None
    missing: dict = field(default_factory=lambda: dict(DEFAULT_MISSING))
    seed: int = 0

    @property
    def n_patients(self) -> int:
        return self.n_negative + self.n_positive

    def rates(self) -> tuple[np.ndarray, np.ndarray]:
        p = np.full(self.n_readers, 0.22) if self.p_rates is None else np.asarray(self.p_rates, float)
        q = np.full(self.n_readers, 0.13) if self.q_rates is None else np.asarray(self.q_rates, float)
        if p.shape != (self.n_readers,) or q.shape != (self.n_readers,):
            raise ValidationError("one false-positive and one false-negative rate per reader is required")
        return p, q

    def weight_vector(self) -> np.ndarray:
        w = np.ones(self.n_patients) if self.weights is None else np.asarray(self.weights, float)
        if w.shape != (self.n_patients,):
            raise ValidationError("one weight per patient is required")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ValidationError("weights must be positive and finite")
        return w

    def ids(self) -> tuple[str, ...]:
        ids = self.reader_ids or _default_reader_ids(self.n_readers)
        if len(ids) != self.n_readers:
            raise ValidationError("reader_ids length must equal n_readers")
        return tuple(ids)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def weighted_draws_without_replacement(weights: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Ordered successive draws, each proportional to the weights still in the urn."""
    w = np.array(weights, dtype=float)
    if k > len(w):
        raise ValidationError(f"cannot draw {k} items from {len(w)}")
    chosen = np.empty(k, dtype=np.int64)
    u = rng.random(k)
    for j in range(k):
        c = np.cumsum(w)
        idx = int(np.searchsorted(c, u[j] * c[-1], side="right"))
        idx = min(idx, len(w) - 1)
        while w[idx] == 0:  # guard against landing on an exhausted slot by rounding
            idx -= 1
        chosen[j] = idx
        w[idx] = 0.0
    return chosen


def simulate_mammography(cfg: MammoConfig, rng: np.random.Generator | None = None) -> RawReplicateTable:
    """Patients 1..n_negative are healthy, the rest diseased.

    For reader j, exactly round(n_negative * p_j) healthy and
    round(n_positive * q_j) diseased patients are misread, chosen by
    successive weighted draws among the patients that reader saw.
    """
    rng = rng if rng is not None else _rng.stream(cfg.seed, 4)
    p, q = cfg.rates()
    w = cfg.weight_vector()
    ids = cfg.ids()
    neg = np.arange(cfg.n_negative)
    pos = np.arange(cfg.n_negative, cfg.n_patients)
    status = np.r_[np.zeros(cfg.n_negative, np.int64), np.ones(cfg.n_positive, np.int64)]
    x = np.tile(status.astype(float)[:, None], (1, cfg.n_readers))
    # missing exams fall on distinct patients, so each affected patient loses one reading
    free_neg, free_pos = neg, pos
    for j, rid in enumerate(ids):
        miss_pos, miss_neg = cfg.missing.get(rid, (0, 0))
        if miss_pos > len(free_pos) or miss_neg > len(free_neg):
            raise ValidationError(f"reader {rid}: more missing exams than patients")
        gone_neg = rng.choice(free_neg, size=miss_neg, replace=False)
        gone_pos = rng.choice(free_pos, size=miss_pos, replace=False)
        free_neg = np.setdiff1d(free_neg, gone_neg)
        free_pos = np.setdiff1d(free_pos, gone_pos)
        seen_neg = np.setdiff1d(neg, gone_neg)
        seen_pos = np.setdiff1d(pos, gone_pos)
        n_fp = round_half_up(cfg.n_negative * p[j])
        n_fn = round_half_up(cfg.n_positive * q[j])
        if n_fp > len(seen_neg) or n_fn > len(seen_pos):
            raise ValidationError(f"reader {rid}: flip count exceeds the patients available")
        fp = seen_neg[weighted_draws_without_replacement(w[seen_neg], n_fp, rng)]
        fn = seen_pos[weighted_draws_without_replacement(w[seen_pos], n_fn, rng)]
        x[fp, j] = 1.0
        x[fn, j] = 0.0
        x[np.setdiff1d(neg, seen_neg), j] = np.nan
        x[np.setdiff1d(pos, seen_pos), j] = np.nan
    pids = tuple(f"m{i + 1:03d}" for i in range(cfg.n_patients))
    return RawReplicateTable(x, ids=pids, status=tuple(int(t) for t in status))


# --- experiment runners ---------------------------------------------------------------

@dataclass(frozen=True)
class McmcSettings:
    chains: int = 4
    iters: int = 5000
    burnin: int = 1000


@dataclass
class ExperimentResult:
    """Long-format rows ``(x, method, rep, value)`` plus the simulated datasets."""

    x_name: str
    value_name: str
    rows: list[tuple[float, str, int, float]]
    datasets: dict = field(default_factory=dict, repr=False)

    def values(self, x: float, method: str) -> np.ndarray:
        return np.array([v for xx, m, _, v in self.rows if m == method and np.isclose(xx, x)])

    def summary(self) -> list[tuple[float, str, float, float, float]]:
        """Median and [0.4, 0.6] quantiles per (x, method), sorted."""
        groups: dict[tuple[float, str], list[float]] = {}
        for x, m, _, v in self.rows:
            groups.setdefault((x, m), []).append(v)
        out = []
        for (x, m) in sorted(groups):
            vals = np.sort(groups[(x, m)])
            q40, med, q60 = np.quantile(vals, [0.4, 0.5, 0.6])
            out.append((x, m, float(med), float(q40), float(q60)))
        return out

    def median_curve(self, method: str) -> tuple[np.ndarray, np.ndarray]:
        rows = [(x, med) for x, m, med, _, _ in self.summary() if m == method]
        xs, meds = zip(*rows)
        return np.array(xs), np.array(meds)

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow([self.x_name, "method", "rep", self.value_name])
            for x, m, r, v in self.rows:
                w.writerow([repr(float(x)), m, r, repr(float(v))])

    def write_summary_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow([self.x_name, "method", "median", "q40", "q60"])
            for row in self.summary():
                w.writerow([repr(float(row[0])), row[1], *(repr(v) for v in row[2:])])


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("BINREP_THREADS", "1")))
    except ValueError:
        return 1


def _fit_all(datasets: Sequence[ReplicateDataset], methods: Sequence[str], seeds: Sequence[int],
             mcmc: McmcSettings, restarts: int) -> dict[str, list]:
    """Per-method fitted objects: score vectors, EM fits and posterior samples."""
    out: dict[str, list] = {}
    if "A" in methods:
        out["A"] = [score_average(d) for d in datasets]
    if "M" in methods:
        out["M"] = [score_median(d) for d in datasets]
    if "MAP" in methods:
        out["MAP"] = [em_fit(d, restarts=restarts, seed=sd) for d, sd in zip(datasets, seeds)]
    for label, make_prior in BAYES_PRIORS.items():
        if label in methods:
            out[label] = gibbs_many(datasets, make_prior(), seeds, mcmc.chains, mcmc.iters, mcmc.burnin)
    return out


def _bias_point(args):
    i, theta, reps, cfg_base, methods, seed, mcmc, restarts = args
    cfg = replace(cfg_base, theta_T=theta)
    datasets = [simulate_dataset(cfg, _rng.stream(seed, 3, i, r)) for r in range(reps)]
    seeds = [_rng.derive(seed, 5, i, r) for r in range(reps)]
    fitted = _fit_all(datasets, methods, seeds, mcmc, restarts)
    rows = []
    for m in methods:
        for r, obj in enumerate(fitted[m]):
            if m in ("A", "M"):
                est = float(obj.scores.mean())
            elif m == "MAP":
                est = float(obj.responsibilities.mean())
            else:
                est = float(obj.theta.mean())
            rows.append((theta, m, r, est - theta))
    return i, rows, datasets


def run_bias_experiment(theta_grid: Sequence[float], reps: int, cfg_base: SimConfig = SimConfig(),
                        methods: Sequence[str] = ALL_METHODS, seed: int | None = None,
                        mcmc: McmcSettings = McmcSettings(), restarts: int = 20,
                        keep_datasets: bool = False) -> ExperimentResult:
    """Prevalence-estimation error theta_hat - theta over a grid of true prevalences."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    seed = cfg_base.seed if seed is None else seed
    jobs = [(i, float(t), reps, cfg_base, tuple(methods), seed, mcmc, restarts) for i, t in enumerate(theta_grid)]
    workers = _workers()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_bias_point, jobs))
    else:
        results = [_bias_point(j) for j in jobs]
    rows, data = [], {}
    for i, r, ds in sorted(results, key=lambda t: t[0]):
        rows.extend(r)
        if keep_datasets:
            data[float(theta_grid[i])] = ds
    return ExperimentResult("theta", "estimate", rows, data)


def method_scores(fitted: dict[str, list], datasets: Sequence[ReplicateDataset], method: str, r: int) -> ScoreVector:
    obj = fitted[method][r]
    if method in ("A", "M"):
        return obj
    if method == "MAP":
        return score_map(datasets[r], obj)
    return ScoreVector("B", np.clip(obj.t_mean, 0.0, 1.0))


def run_risk_experiment(a_grid: Sequence[float], reps: int, cfg_base: SimConfig = SimConfig(),
                        methods: Sequence[str] = ALL_METHODS, seed: int | None = None,
                        mcmc: McmcSettings = McmcSettings(), restarts: int = 20) -> ExperimentResult:
    """Mean symmetric-loss risk with thresholds (a, 1 - a) at a fixed prevalence."""
    a_grid = [float(a) for a in a_grid]
    if any(not 0 < a <= 0.5 for a in a_grid):
        raise ValueError("a_grid must lie in (0, 1/2]")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    seed = cfg_base.seed if seed is None else seed
    datasets = [simulate_dataset(cfg_base, _rng.stream(seed, 6, r)) for r in range(reps)]
    seeds = [_rng.derive(seed, 7, r) for r in range(reps)]
    fitted = _fit_all(datasets, methods, seeds, mcmc, restarts)
    rows = []
    for m in methods:
        for r, d in enumerate(datasets):
            scores = method_scores(fitted, datasets, m, r)
            for a in a_grid:
                dec = classify(scores, ThresholdPair.symmetric(a))
                rows.append((a, m, r, empirical_risk(dec, d.status, LossSpec.symmetric(a), mode="mean")))
    rows.sort(key=lambda t: (t[0], ALL_METHODS.index(t[1]) if t[1] in ALL_METHODS else 9, t[2]))
    return ExperimentResult("a", "risk", rows, {"datasets": datasets})


def subsample_readers(raw: RawReplicateTable, k: int, rng: np.random.Generator) -> RawReplicateTable:
    """Keep ``k`` random reader columns; patients left with no reading are an error."""
    cols = np.sort(rng.choice(raw.values.shape[1], size=k, replace=False))
    return RawReplicateTable(raw.values[:, cols], ids=raw.ids, status=raw.status)


@dataclass
class MammographyResult:
    risk: ExperimentResult               # x = dataset index, value = sum over a of mean risk
    predictive: list[tuple[int, str, int, float]]  # (dataset, method, s, predicted score at n = n_readers_kept)


def run_mammography_experiment(n_datasets: int = 100, cfg: MammoConfig = MammoConfig(), n_readers_kept: int = 4,
                               train_fraction: float = 0.9, a_grid: Sequence[float] | None = None,
                               methods: Sequence[str] = ALL_METHODS, seed: int = 0,
                               mcmc: McmcSettings = McmcSettings(), restarts: int = 20) -> MammographyResult:
    """Train on a random share of patients, predict the rest, score with summed mean risks."""
    a_grid = list(np.round(np.arange(0.15, 0.45 + 1e-9, 0.05), 10)) if a_grid is None else list(a_grid)
    train_sets, test_sets = [], []
    for k in range(n_datasets):
        rng = _rng.stream(seed, 8, k)
        raw = simulate_mammography(cfg, rng)
        sub = reduce_to_sufficient(subsample_readers(raw, n_readers_kept, rng))
        perm = rng.permutation(len(sub))
        n_train = round_half_up(train_fraction * len(sub))
        train_sets.append(sub.subset(np.sort(perm[:n_train])))
        test_sets.append(sub.subset(np.sort(perm[n_train:])))
    seeds = [_rng.derive(seed, 9, k) for k in range(n_datasets)]
    fitted = _fit_all(train_sets, methods, seeds, mcmc, restarts)
    s_grid = np.arange(n_readers_kept + 1)
    rows, predictive = [], []
    for m in methods:
        for k, (train, test) in enumerate(zip(train_sets, test_sets)):
            obj = fitted[m][k]
            if m in ("A", "M"):
                params = estimate(train, obj).params()
                predict = lambda n, s, params=params: predict_plugin(n, s, params)  # noqa: E731
            elif m == "MAP":
                predict = lambda n, s, params=obj.params: predict_plugin(n, s, params)  # noqa: E731
            else:
                predict = lambda n, s, sample=obj: predict_bayes(n, s, sample)  # noqa: E731
            y = np.atleast_1d(predict(test.n, test.s))
            total = sum(
                empirical_risk(phi(y, a, 1 - a), test.status, LossSpec.symmetric(a), mode="mean") for a in a_grid
            )
            rows.append((k, m, k, float(total)))
            for s, v in zip(s_grid, np.atleast_1d(predict(np.full_like(s_grid, n_readers_kept), s_grid))):
                predictive.append((k, m, int(s), float(v)))
    return MammographyResult(ExperimentResult("dataset", "sum_risk", rows), predictive)
