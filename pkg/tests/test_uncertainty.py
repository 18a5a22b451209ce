import numpy as np
import pytest

from rankforge import model, uncertainty
from rankforge.data import SyntheticConfig, generate_synthetic
from rankforge.encoding import EncodingConfig
from rankforge.numerics import RngStream


@pytest.fixture(scope="module")
def trained():
    ds = generate_synthetic(SyntheticConfig(n=100, d=8, seed=17))
    cfg = model.TrainConfig(epochs=20, m=5, seed=4, dropout_p=0.5, hidden=(64, 32))
    params, _ = model.train(ds, cfg)
    return ds, params


def untrained_params(dropout_p=0.5):
    enc = EncodingConfig(n=20, m=4)
    return model.init_params(5, enc, RngStream(1, "u"), hidden=(9, 6), dropout_p=dropout_p)


class TestPairwiseConfidence:
    def test_deterministic_pair_without_dropout(self):
        p = untrained_params()
        rng = np.random.default_rng(0)
        f_a, f_b = rng.normal(size=5), rng.normal(size=5)
        est = uncertainty.mc_pairwise_confidence(p, f_a, f_b, n_passes=7, p=0.0, seed=3)
        assert est.confidence in (0.0, 1.0)
        flipped = uncertainty.mc_pairwise_confidence(p, f_b, f_a, n_passes=7, p=0.0, seed=3)
        assert est.confidence + flipped.confidence == 1.0

    def test_identical_items_give_exact_half(self):
        p = untrained_params()
        f = np.random.default_rng(1).normal(size=5)
        est = uncertainty.mc_pairwise_confidence(p, f, f, n_passes=9, p=0.5, seed=2)
        assert est.confidence == 0.5

    def test_counting_definition(self):
        p = untrained_params()
        rng = np.random.default_rng(2)
        f_a, f_b = rng.normal(size=5), rng.normal(size=5)
        n_passes = 16
        # oracle: recount favorable passes with the same derived masks
        favorable = 0.0
        for t in range(n_passes):
            mask_rng = RngStream(5, 0).derive(f"pass-{t + 1}")
            m1, m2 = model.make_dropout_masks((1, 9), (1, 6), 0.5, mask_rng)
            masks = (np.repeat(m1, 2, axis=0), np.repeat(m2, 2, axis=0))
            out = model.forward_batch(p, np.stack([f_a, f_b]), mode="mc", masks=masks)
            sa, sb = out["s"]
            favorable += (sa > sb) + 0.5 * (sa == sb)
        est = uncertainty.mc_pairwise_confidence(p, f_a, f_b, n_passes=n_passes, p=0.5, seed=5)
        assert est.confidence == favorable / n_passes

    def test_antisymmetry_exact_under_paired_masks(self):
        p = untrained_params()
        rng = np.random.default_rng(3)
        for trial in range(20):
            f_a, f_b = rng.normal(size=5), rng.normal(size=5)
            ab = uncertainty.mc_pairwise_confidence(p, f_a, f_b, 10, 0.5, seed=trial)
            ba = uncertainty.mc_pairwise_confidence(p, f_b, f_a, 10, 0.5, seed=trial)
            assert ab.confidence + ba.confidence == 1.0

    def test_determinism(self):
        p = untrained_params()
        rng = np.random.default_rng(4)
        f_a, f_b = rng.normal(size=5), rng.normal(size=5)
        a = uncertainty.mc_pairwise_confidence(p, f_a, f_b, 10, 0.5, seed=9)
        b = uncertainty.mc_pairwise_confidence(p, f_a, f_b, 10, 0.5, seed=9)
        assert a == b

    def test_zero_dropout_collapses_to_degenerate_values(self):
        p = untrained_params(dropout_p=0.0)
        rng = np.random.default_rng(5)
        for _ in range(10):
            f_a, f_b = rng.normal(size=5), rng.normal(size=5)
            est = uncertainty.mc_pairwise_confidence(p, f_a, f_b, 8, 0.0, seed=1)
            assert est.confidence in (0.0, 0.5, 1.0)

    def test_invalid_args(self):
        p = untrained_params()
        f = np.zeros(5)
        with pytest.raises(ValueError):
            uncertainty.mc_pairwise_confidence(p, f, f, 0, 0.5)
        with pytest.raises(ValueError):
            uncertainty.mc_pairwise_confidence(p, f, f, 5, 1.0)


class TestProfile:
    def test_profile_shape_and_order(self, trained):
        ds, params = trained
        anchor = ds.items[0].id
        rows = uncertainty.confidence_profile(params, anchor, ds, n_passes=5, p=0.5, seed=0)
        assert len(rows) == len(ds) - 1
        ranks = [r for _, r, _ in rows]
        assert ranks == sorted(ranks)
        assert all(0.0 <= c <= 1.0 for _, _, c in rows)

    def test_profile_matches_pairwise_calls(self, trained):
        ds, params = trained
        anchor = ds.items[3]
        rows = uncertainty.confidence_profile(
            params, anchor.id, ds, n_passes=5, p=0.5, seed=11
        )
        for qid, rank, conf in rows[:5]:
            est = uncertainty.mc_pairwise_confidence(
                params, anchor.features, ds.by_id(qid).features, 5, 0.5, seed=11
            )
            assert conf == pytest.approx(est.confidence, abs=1e-12)

    def test_extremes_more_certain_than_middle(self, trained):
        # the Fig-4-shaped property: a top-ranked anchor is confidently
        # separated from everything, a median anchor is uncertain near
        # its own rank
        ds, params = trained
        by_rank = sorted(ds.items, key=lambda it: -it.rank)
        extreme = by_rank[0]
        median = by_rank[len(by_rank) // 2]
        prof_extreme = uncertainty.confidence_profile(params, extreme.id, ds, 10, 0.5, seed=1)
        prof_median = uncertainty.confidence_profile(params, median.id, ds, 10, 0.5, seed=1)
        mean_extreme = float(np.mean([c for _, _, c in prof_extreme]))
        near = sorted(prof_median, key=lambda r: abs(r[1] - median.rank))[:10]
        mean_near = float(np.mean([c for _, _, c in near]))
        assert mean_extreme > mean_near

    def test_unknown_anchor_raises(self, trained):
        ds, params = trained
        with pytest.raises(KeyError):
            uncertainty.confidence_profile(params, "nope", ds, 5, 0.5, seed=0)


class TestCsv:
    def test_profile_csv_roundtrip(self, tmp_path, trained):
        ds, params = trained
        rows = uncertainty.confidence_profile(params, ds.items[0].id, ds, 5, 0.5, seed=0)
        path = tmp_path / "profile.csv"
        uncertainty.write_profile_csv(path, rows)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "query_id,truth_rank,confidence"
        assert len(lines) == len(rows) + 1
