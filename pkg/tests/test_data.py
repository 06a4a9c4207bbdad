import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from binrep.data import (
    IndividualRecord,
    ModelParams,
    RawReplicateTable,
    ReplicateDataset,
    latent_oracle_estimates,
    load_csv,
    reduce_to_sufficient,
    write_csv,
    write_wide_csv,
)
from binrep.errors import DomainError, ParseError, ValidationError
from binrep.simulation import SimConfig, simulate_dataset


def _write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestReduce:
    def test_missing_cell_dropped(self):
        raw = RawReplicateTable(np.array([[1, 0, 1, np.nan]]))
        d = reduce_to_sufficient(raw)
        assert (d.n[0], d.s[0]) == (3, 2)

    def test_all_zero_row(self):
        d = reduce_to_sufficient(RawReplicateTable(np.zeros((1, 4))))
        assert (d.n[0], d.s[0]) == (4, 0)

    def test_empty_row_names_row(self):
        with pytest.raises(ValidationError, match="row 1"):
            RawReplicateTable(np.array([[1.0, 0.0], [np.nan, np.nan]]))

    def test_non_binary_value(self):
        with pytest.raises(ValidationError):
            RawReplicateTable(np.array([[2.0, 0.0]]))

    @given(st.lists(st.sampled_from([0.0, 1.0, np.nan]), min_size=1, max_size=12), st.randoms())
    def test_permutation_invariant(self, row, rnd):
        if all(np.isnan(row)):
            row[0] = 1.0
        shuffled = list(row)
        rnd.shuffle(shuffled)
        a = reduce_to_sufficient(RawReplicateTable(np.array([row])))
        b = reduce_to_sufficient(RawReplicateTable(np.array([shuffled])))
        assert (a.n[0], a.s[0]) == (b.n[0], b.s[0])


class TestRecords:
    def test_s_above_n(self):
        with pytest.raises(ValidationError):
            IndividualRecord("a", 2, 3)

    def test_bad_status(self):
        with pytest.raises(ValidationError):
            IndividualRecord("a", 2, 1, status=2)

    def test_duplicate_ids(self):
        with pytest.raises(ValidationError, match="duplicate"):
            ReplicateDataset((IndividualRecord("a", 1, 0), IndividualRecord("a", 1, 1)))

    def test_empty_dataset(self):
        with pytest.raises(ValidationError):
            ReplicateDataset(())

    def test_model_params_domain(self):
        with pytest.raises(DomainError):
            ModelParams(0.5, 0.5, 0.1)
        with pytest.raises(DomainError):
            ModelParams(1.0, 0.1, 0.1)

    def test_arrays_read_only(self):
        d = ReplicateDataset.from_counts([2], [1])
        with pytest.raises(ValueError):
            d.n[0] = 5


class TestLoadCsv:
    def test_sufficient_rows(self, tmp_path):
        path = _write(tmp_path, "id,n,s,status\np07,6,4,\np01,3,3,1\n")
        d = load_csv(path)
        assert d.individuals[0] == IndividualRecord("p07", 6, 4, None)
        assert d.individuals[1] == IndividualRecord("p01", 3, 3, 1)

    def test_wide_row(self, tmp_path):
        path = _write(tmp_path, "id,x1,x2,x3,x4\np02,1,0,,1\n")
        d = load_csv(path, format="wide")
        assert (d.n[0], d.s[0]) == (3, 2)

    def test_wide_na_token(self, tmp_path):
        path = _write(tmp_path, "id,x1,x2\na,NA,1\n")
        assert load_csv(path, format="wide").n[0] == 1

    def test_s_greater_than_n_reports_row(self, tmp_path):
        path = _write(tmp_path, "id,n,s,status\na,2,1,\nb,2,3,\n")
        with pytest.raises(ValidationError, match="row 3"):
            load_csv(path)

    def test_non_binary_cell(self, tmp_path):
        path = _write(tmp_path, "id,x1,x2\na,1,2\n")
        with pytest.raises(ParseError, match="row 2"):
            load_csv(path, format="wide")

    def test_duplicate_id(self, tmp_path):
        path = _write(tmp_path, "id,n,s,status\na,2,1,\na,2,0,\n")
        with pytest.raises(ValidationError, match="duplicate"):
            load_csv(path)

    def test_bad_header(self, tmp_path):
        path = _write(tmp_path, "name,n,s\na,2,1\n")
        with pytest.raises(ParseError):
            load_csv(path)

    def test_row_order_preserved(self, tmp_path):
        path = _write(tmp_path, "id,n,s\nz,2,1\na,3,0\nm,1,1\n")
        assert load_csv(path).ids == ["z", "a", "m"]

    def test_wide_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        x = rng.integers(0, 2, size=(30, 5)).astype(float)
        x[rng.random(x.shape) < 0.2] = np.nan
        x[:, 0] = 1.0
        raw = RawReplicateTable(x, ids=tuple(f"r{i}" for i in range(30)))
        write_wide_csv(raw, tmp_path / "w.csv")
        d = load_csv(tmp_path / "w.csv", format="wide")
        write_csv(d, tmp_path / "s.csv")
        d2 = load_csv(tmp_path / "s.csv")
        assert d2 == d
        np.testing.assert_array_equal(d2.n, np.isfinite(x).sum(axis=1))
        np.testing.assert_array_equal(d2.s, np.nansum(x, axis=1))

    def test_status_round_trip(self, tmp_path):
        d = ReplicateDataset.from_counts([2, 3], [1, 3], status=[0, 1])
        write_csv(d, tmp_path / "s.csv")
        assert load_csv(tmp_path / "s.csv") == d


class TestLatentEstimates:
    def test_symmetric_counts(self):
        d = ReplicateDataset.from_counts([2, 2], [1, 1], status=[0, 1])
        assert tuple(latent_oracle_estimates(d)) == (0.5, 0.5, 0.5)

    def test_one_class_undefined_p(self):
        d = ReplicateDataset.from_counts([3, 2], [3, 2], status=[1, 1])
        with pytest.raises(ValidationError, match="false-positivity"):
            latent_oracle_estimates(d)

    def test_missing_status(self):
        d = ReplicateDataset.from_counts([3, 2], [3, 2])
        with pytest.raises(ValidationError):
            latent_oracle_estimates(d)

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 10_000))
    def test_converges_to_truth(self, seed):
        cfg = SimConfig(theta_T=0.4, p=0.1, q=0.05, N=2000, n_min=5, n_max=10, seed=seed)
        d = simulate_dataset(cfg)
        est = latent_oracle_estimates(d)
        t = d.status
        m0 = np.sum(d.n * (1 - t))
        m1 = np.sum(d.n * t)
        assert abs(est.p - 0.1) < 4 * np.sqrt(0.1 * 0.9 / m0)
        assert abs(est.q - 0.05) < 4 * np.sqrt(0.05 * 0.95 / m1)
