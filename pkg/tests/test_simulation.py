import numpy as np
import pytest
from scipy import stats

from binrep.coeffs import prevalence_bias
from binrep.data import reduce_to_sufficient
from binrep.errors import DomainError, ValidationError
from binrep.simulation import (
    ExperimentResult,
    MammoConfig,
    McmcSettings,
    SimConfig,
    round_half_up,
    run_bias_experiment,
    run_mammography_experiment,
    run_risk_experiment,
    simulate_dataset,
    simulate_mammography,
    weighted_draws_without_replacement,
)

FAST = McmcSettings(chains=2, iters=400, burnin=100)


class TestSimulateDataset:
    def test_noiseless(self):
        d = simulate_dataset(SimConfig(p=1e-12, q=1e-12, N=500, seed=1))
        np.testing.assert_array_equal(d.s, d.n * d.status)

    def test_marginal_mean(self):
        d = simulate_dataset(SimConfig(theta_T=0.4, p=0.1, q=0.05, N=200, seed=2))
        y = d.s / d.n
        assert abs(y.mean() - 0.44) < 4 * y.std(ddof=1) / np.sqrt(len(y))

    def test_full_prevalence(self):
        d = simulate_dataset(SimConfig(theta_T=1.0, N=50, seed=3))
        assert np.all(d.status == 1)

    def test_replicate_marginal(self):
        cfg = SimConfig(theta_T=0.3, p=0.2, q=0.1, N=30_000, seed=4)
        d = simulate_dataset(cfg)
        total = d.n.sum()
        prob = 0.3 * 0.9 + 0.7 * 0.2
        # replicates within an individual share T; use the individual-level variance
        y = d.s - prob * d.n
        se = np.sqrt(np.sum(y**2)) / total
        assert total > 1e5
        assert abs(d.s.sum() / total - prob) < 4 * se

    def test_counts_in_range(self):
        d = simulate_dataset(SimConfig(N=300, n_min=3, n_max=3, seed=5))
        assert np.all(d.n == 3)

    def test_deterministic(self):
        a = simulate_dataset(SimConfig(seed=9))
        b = simulate_dataset(SimConfig(seed=9))
        assert a == b

    def test_config_validation(self):
        with pytest.raises(DomainError):
            SimConfig(p=0.5)
        with pytest.raises(ValueError):
            SimConfig(N=0)
        with pytest.raises(ValueError):
            SimConfig(n_min=0)
        with pytest.raises(ValueError):
            SimConfig(n_max=201)


class TestWeightedDraws:
    def test_uniform_positions(self):
        rng = np.random.default_rng(0)
        counts = np.zeros(10)
        for _ in range(10_000):
            counts[weighted_draws_without_replacement(np.ones(10), 3, rng)] += 1
        assert stats.chisquare(counts).pvalue > 0.001

    def test_dominant_weight(self):
        rng = np.random.default_rng(1)
        w = np.ones(84)
        w[17] = 1e6
        hits = sum(weighted_draws_without_replacement(w, 1, rng)[0] == 17 for _ in range(10_000))
        assert hits / 10_000 >= 0.999

    def test_sequential_probability(self):
        # P(first = 0, second = 1) = w0/W * w1/(W - w0)
        w = np.array([3.0, 2.0, 1.0])
        rng = np.random.default_rng(2)
        draws = [tuple(weighted_draws_without_replacement(w, 2, rng)) for _ in range(20_000)]
        freq = sum(d == (0, 1) for d in draws) / len(draws)
        want = 3 / 6 * 2 / 3
        assert abs(freq - want) < 4 * np.sqrt(want * (1 - want) / len(draws))

    def test_too_many(self):
        with pytest.raises(ValidationError):
            weighted_draws_without_replacement(np.ones(3), 4, np.random.default_rng(0))


@pytest.fixture(scope="module")
def raw():
    return simulate_mammography(MammoConfig(seed=3))


class TestMammography:
    def test_status_layout(self, raw):
        assert raw.status == (0,) * 84 + (1,) * 64

    def test_exact_flip_counts(self, raw):
        x = raw.values
        fp = np.nansum(x[:84], axis=0)
        fn = np.sum(x[84:] == 0, axis=0)
        assert np.all(fp == round_half_up(84 * 0.22))
        assert np.all(fn == round_half_up(64 * 0.13))

    def test_missing_pattern(self, raw):
        ids = MammoConfig().ids()
        miss = np.isnan(raw.values)
        for rid, (pos, neg) in {"1201": (1, 0), "7714": (3, 5), "9007": (0, 1)}.items():
            j = ids.index(rid)
            assert miss[84:, j].sum() == pos
            assert miss[:84, j].sum() == neg
        assert miss.sum() == 10
        d = reduce_to_sufficient(raw)
        assert sorted(set(d.n.tolist())) == [109, 110]

    def test_noiseless(self):
        raw = simulate_mammography(MammoConfig(p_rates=(0.0,) * 110, q_rates=(0.0,) * 110, seed=0))
        x = raw.values
        obs = ~np.isnan(x)
        t = np.array(raw.status, dtype=float)[:, None] * np.ones_like(x)
        np.testing.assert_array_equal(x[obs], t[obs])

    def test_bad_weights(self):
        w = np.ones(148)
        w[3] = 0.0
        with pytest.raises(ValidationError):
            simulate_mammography(MammoConfig(weights=tuple(w)))

    def test_flip_count_exceeds_class(self):
        with pytest.raises(ValidationError):
            simulate_mammography(MammoConfig(p_rates=(1.0,) * 110))

    def test_deterministic(self):
        a = simulate_mammography(MammoConfig(seed=4))
        b = simulate_mammography(MammoConfig(seed=4))
        np.testing.assert_array_equal(a.values, b.values)

    def test_round_half_up(self):
        assert round_half_up(18.48) == 18
        assert round_half_up(8.32) == 8
        assert round_half_up(2.5) == 3


class TestExperiments:
    def test_bias_table(self):
        res = run_bias_experiment([0.2, 0.6], 4, SimConfig(N=80, seed=1), ["A", "M"], mcmc=FAST)
        assert len(res.rows) == 2 * 2 * 4
        assert {m for _, m, _, _ in res.rows} == {"A", "M"}
        summary = res.summary()
        assert len(summary) == 4
        for _, _, med, lo, hi in summary:
            assert lo <= med <= hi

    def test_bias_method_a_centred_on_line(self):
        cfg = SimConfig(N=200, seed=3)
        theta = 0.1 / 0.15
        res = run_bias_experiment([theta], 60, cfg, ["A"])
        med = res.summary()[0][2]
        assert abs(med - prevalence_bias(theta, 0.1, 0.05, [2], "A")) < 0.01

    def test_risk_table(self):
        res = run_risk_experiment([0.1, 0.3], 3, SimConfig(N=60, seed=2), ["A", "M", "MAP", "B"], mcmc=FAST)
        assert len(res.rows) == 2 * 4 * 3
        assert all(0 <= v <= 1 for *_, v in res.rows)

    def test_risk_grid_validation(self):
        with pytest.raises(ValueError):
            run_risk_experiment([0.6], 2)

    def test_csv_outputs(self, tmp_path):
        res = ExperimentResult("a", "risk", [(0.1, "A", 0, 0.5), (0.1, "A", 1, 0.7)])
        res.write_csv(tmp_path / "r.csv")
        res.write_summary_csv(tmp_path / "s.csv")
        assert (tmp_path / "r.csv").read_text().splitlines()[0] == "a,method,rep,risk"
        assert (tmp_path / "s.csv").read_text().splitlines()[0] == "a,method,median,q40,q60"

    def test_parallel_matches_serial(self, monkeypatch):
        args = ([0.2, 0.4], 3, SimConfig(N=40, seed=6), ["A", "MAP"])
        serial = run_bias_experiment(*args, mcmc=FAST)
        monkeypatch.setenv("BINREP_THREADS", "2")
        parallel = run_bias_experiment(*args, mcmc=FAST)
        assert serial.rows == parallel.rows

    def test_mammography_pipeline(self):
        res = run_mammography_experiment(2, seed=1, mcmc=FAST)
        assert len(res.risk.rows) == 2 * 4
        assert len(res.predictive) == 2 * 4 * 5
        for k in range(2):
            for m in ("A", "M", "MAP", "B"):
                scores = [v for kk, mm, _, v in res.predictive if kk == k and mm == m]
                assert np.all(np.diff(scores) > 0)
