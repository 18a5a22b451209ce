import json

import numpy as np
import pytest

from rankforge import data
from rankforge.metrics import spearman


def small_dataset(n=7, d=3, seed=5):
    return data.generate_synthetic(data.SyntheticConfig(n=n, d=d, seed=seed))


class TestSyntheticGenerator:
    def test_same_seed_is_byte_identical(self, tmp_path):
        cfg = data.SyntheticConfig(n=30, d=8, seed=11, feature_noise_sigma=0.3)
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        data.save(data.generate_synthetic(cfg), p1)
        data.save(data.generate_synthetic(cfg), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_ranks_are_permutation(self):
        ds = small_dataset(n=25)
        assert sorted(it.rank for it in ds.items) == list(range(1, 26))

    def test_latent_order_matches_rank_order(self):
        ds = small_dataset(n=40, seed=2)
        assert spearman(ds.ranks(), [it.latent_quality for it in ds.items]) == 1.0

    def test_noiseless_linear_features_recover_quality(self):
        # Least-squares oracle: regress q on features, expect R^2 >= 0.99.
        cfg = data.SyntheticConfig(n=100, d=6, informative_dim=4, seed=3)
        ds = data.generate_synthetic(cfg)
        X = np.column_stack([ds.features_matrix(), np.ones(len(ds))])
        q = np.array([it.latent_quality for it in ds.items])
        coef, *_ = np.linalg.lstsq(X, q, rcond=None)
        resid = q - X @ coef
        r2 = 1.0 - float(resid @ resid) / float(((q - q.mean()) ** 2).sum())
        assert r2 >= 0.99

    def test_informative_dim_limits_signal_columns(self):
        cfg = data.SyntheticConfig(n=20, d=5, informative_dim=2, seed=9)
        ds = data.generate_synthetic(cfg)
        feats = ds.features_matrix()
        assert np.all(feats[:, 2:] == 0.0)
        assert np.any(feats[:, :2] != 0.0)

    def test_rejects_tiny_n(self):
        with pytest.raises(data.DatasetError):
            data.SyntheticConfig(n=1, d=3)

    def test_polynomial_basis_recovers_quality(self):
        # oracle: regress q on [f, 1]; cubic features of q are invertible
        # enough for least squares to reach R^2 >= 0.99 without noise
        cfg = data.SyntheticConfig(n=80, d=5, nonlinearity="polynomial", seed=8)
        ds = data.generate_synthetic(cfg)
        X = np.column_stack([ds.features_matrix(), np.ones(len(ds))])
        q = np.array([it.latent_quality for it in ds.items])
        coef, *_ = np.linalg.lstsq(X, q, rcond=None)
        resid = q - X @ coef
        r2 = 1.0 - float(resid @ resid) / float(((q - q.mean()) ** 2).sum())
        assert r2 >= 0.99

    def test_informative_dim_defaults_to_d(self):
        cfg = data.SyntheticConfig(n=10, d=7, seed=1)
        assert cfg.informative_dim == 7
        ds = data.generate_synthetic(cfg)
        assert np.all(np.any(ds.features_matrix() != 0.0, axis=0))


class TestRoundTrip:
    def test_save_load_identity(self, tmp_path):
        ds = small_dataset(n=12, d=4)
        path = tmp_path / "ds.jsonl"
        data.save(ds, path)
        back = data.load(path)
        assert len(back) == len(ds)
        assert back.feature_dim == ds.feature_dim
        for a, b in zip(ds.items, back.items):
            assert a.id == b.id and a.rank == b.rank
            assert a.latent_quality == b.latent_quality
            # bit-pattern equality, not approximate
            np.testing.assert_array_equal(a.features, b.features)

    def test_duplicate_rank_names_both_items(self, tmp_path):
        path = tmp_path / "dup.jsonl"
        header = {"format": "rankforge-dataset", "version": 1, "feature_dim": 1, "n": 3}
        rows = [
            {"id": "a", "features": [0.1], "rank": 1, "latent_quality": None},
            {"id": "b", "features": [0.2], "rank": 5, "latent_quality": None},
            {"id": "c", "features": [0.3], "rank": 5, "latent_quality": None},
        ]
        path.write_text("\n".join(json.dumps(r) for r in [header, *rows]) + "\n")
        with pytest.raises(data.DatasetError, match=r"duplicate rank 5.*'b'.*'c'"):
            data.load(path)

    def test_empty_file_is_no_items(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        with pytest.raises(data.DatasetError, match="no items"):
            data.load(path)

    def test_header_only_is_no_items(self, tmp_path):
        path = tmp_path / "h.jsonl"
        path.write_text(
            json.dumps({"format": "rankforge-dataset", "version": 1, "feature_dim": 2, "n": 0})
            + "\n"
        )
        with pytest.raises(data.DatasetError, match="no items"):
            data.load(path)

    def test_unknown_version_rejected(self, tmp_path):
        path = tmp_path / "v9.jsonl"
        path.write_text(
            json.dumps({"format": "rankforge-dataset", "version": 9, "feature_dim": 2, "n": 0})
            + "\n"
        )
        with pytest.raises(data.DatasetError, match="version"):
            data.load(path)

    def test_malformed_record_names_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        header = {"format": "rankforge-dataset", "version": 1, "feature_dim": 1, "n": 1}
        path.write_text(json.dumps(header) + "\n{not json}\n")
        with pytest.raises(data.DatasetError, match=":2:"):
            data.load(path)


class TestKFold:
    def test_partition_arithmetic(self):
        ds = small_dataset(n=300, d=2, seed=1)
        pairs = data.kfold_split(ds, 10, seed=0)
        assert len(pairs) == 10
        test_ids = [frozenset(it.id for it in te.items) for _, te in pairs]
        assert all(len(s) == 30 for s in test_ids)
        for i in range(10):
            for j in range(i + 1, 10):
                assert not (test_ids[i] & test_ids[j])
        assert frozenset.union(*test_ids) == {it.id for it in ds.items}

    def test_train_ranks_redensified(self):
        ds = small_dataset(n=300, d=2, seed=1)
        train, test = data.kfold_split(ds, 10, seed=0)[0]
        assert sorted(it.rank for it in train.items) == list(range(1, 271))
        assert sorted(it.rank for it in test.items) == list(range(1, 31))

    def test_densification_preserves_order(self):
        ds = small_dataset(n=40, d=2, seed=4)
        orig_rank = {it.id: it.rank for it in ds.items}
        for train, test in data.kfold_split(ds, 5, seed=7):
            for sub in (train, test):
                items = sorted(sub.items, key=lambda it: it.rank)
                origs = [orig_rank[it.id] for it in items]
                assert origs == sorted(origs)

    def test_k_larger_than_n_rejected(self):
        ds = small_dataset(n=5)
        with pytest.raises(data.DatasetError):
            data.kfold_split(ds, 6, seed=0)


class TestPercentileRank:
    def test_top_rank_is_one(self):
        assert data.percentile_rank(10, 10) == 1.0

    def test_quarter(self):
        assert data.percentile_rank(1, 4) == 0.25

    def test_monotone_in_rank(self):
        vals = [data.percentile_rank(y, 9) for y in range(1, 10)]
        assert vals == sorted(vals)

    def test_out_of_range(self):
        with pytest.raises(data.DatasetError):
            data.percentile_rank(0, 5)
        with pytest.raises(data.DatasetError):
            data.percentile_rank(6, 5)
