import json

import pytest

from rankforge import cli, data

FAST = [
    "--epochs", "4", "--m", "4", "--hidden", "24,12", "--dropout", "0.2",
]


@pytest.fixture(scope="module")
def dataset_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("ds") / "synth.jsonl"
    rc = cli.main(["generate", "--n", "60", "--d", "6", "--seed", "3", "--out", str(path)])
    assert rc == 0
    return path


class TestGenerate:
    def test_writes_loadable_dataset(self, dataset_path):
        ds = data.load(dataset_path)
        assert len(ds) == 60
        assert ds.feature_dim == 6

    def test_bad_flags_exit_nonzero(self, tmp_path, capsys):
        rc = cli.main(["generate", "--n", "1", "--out", str(tmp_path / "x.jsonl")])
        assert rc == 1
        assert "error:" in capsys.readouterr().err


class TestTrainEval:
    def test_train_writes_checkpoint_and_log(self, dataset_path, tmp_path):
        out = tmp_path / "run"
        rc = cli.main(
            ["train", "--dataset", str(dataset_path), "--out", str(out), "--seed", "2", *FAST]
        )
        assert rc == 0
        assert (out / "model.ckpt").is_file()
        log = json.loads((out / "train_log.json").read_text())
        assert log["method"] == "orbnet"
        assert len(log["log"]) == 4

    def test_eval_writes_metric_row(self, dataset_path, tmp_path):
        out = tmp_path / "run"
        cli.main(["train", "--dataset", str(dataset_path), "--out", str(out), *FAST])
        report = tmp_path / "report.csv"
        rc = cli.main(
            [
                "eval", "--checkpoint", str(out / "model.ckpt"),
                "--dataset", str(dataset_path), "--out", str(report),
            ]
        )
        assert rc == 0
        lines = report.read_text().strip().split("\n")
        assert lines[0].startswith("# config:")
        assert lines[1] == "method,fold,spc,pacc,prc,ktc,ndcg@3,ndcg@5"
        assert lines[2].startswith("orbnet,0,")

    def test_baseline_training(self, dataset_path, tmp_path):
        out = tmp_path / "rk"
        rc = cli.main(
            [
                "train", "--dataset", str(dataset_path), "--out", str(out),
                "--method", "ranknet", *FAST,
            ]
        )
        assert rc == 0
        from rankforge.baselines import load_scorer_checkpoint

        _, header = load_scorer_checkpoint(out / "model.ckpt")
        assert header["method"] == "ranknet"


class TestCv:
    def test_cv_outputs_fold_rows_and_summary(self, dataset_path, tmp_path):
        out = tmp_path / "cv"
        rc = cli.main(
            [
                "cv", "--dataset", str(dataset_path), "--k", "5",
                "--out", str(out), "--seed", "1", *FAST,
            ]
        )
        assert rc == 0
        folds = (out / "cv_folds.csv").read_text().strip().split("\n")
        assert len(folds) == 2 + 5  # comment + header + 5 folds
        summary = (out / "cv_summary.csv").read_text()
        assert "mean" in summary and "std" in summary

    def test_cv_rerun_byte_identical(self, dataset_path, tmp_path):
        args = [
            "cv", "--dataset", str(dataset_path), "--k", "3", "--seed", "7", *FAST,
        ]
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert cli.main([*args, "--out", str(out1)]) == 0
        assert cli.main([*args, "--out", str(out2)]) == 0
        assert (out1 / "cv_folds.csv").read_bytes() == (out2 / "cv_folds.csv").read_bytes()
        assert (out1 / "cv_summary.csv").read_bytes() == (out2 / "cv_summary.csv").read_bytes()

    def test_row_embeds_reproducible_config(self, dataset_path, tmp_path):
        out = tmp_path / "cv"
        cli.main(
            ["cv", "--dataset", str(dataset_path), "--k", "3", "--seed", "7",
             "--out", str(out), *FAST]
        )
        first = (out / "cv_folds.csv").read_text().split("\n")[0]
        config = json.loads(first.removeprefix("# config: "))
        assert config["k"] == 3 and config["cfg"]["seed"] == 7
        assert config["dataset"].endswith("synth.jsonl")


class TestVariance:
    def test_variance_aggregates_models(self, dataset_path, tmp_path):
        out = tmp_path / "var"
        rc = cli.main(
            [
                "variance", "--dataset", str(dataset_path), "--k", "3", "--seeds", "2",
                "--out", str(out), *FAST,
            ]
        )
        assert rc == 0
        text = (out / "variance.csv").read_text()
        rows = [l for l in text.strip().split("\n") if not l.startswith("#") and "," in l]
        assert len(rows) == 1 + 6  # header + 2 seeds * 3 folds
        summary = json.loads(text.strip().split("\n")[-1].removeprefix("# summary: "))
        assert summary["models"] == 6


class TestUncertaintyCommand:
    def test_writes_profiles(self, dataset_path, tmp_path):
        out = tmp_path / "unc"
        rc = cli.main(
            [
                "uncertainty", "--dataset", str(dataset_path), "--out", str(out),
                "--anchors", "1,5", "--n-passes", "4", *FAST,
            ]
        )
        assert rc == 0
        files = sorted(out.glob("confidence_anchor_pos*.csv"))
        assert len(files) == 2
        lines = files[0].read_text().strip().split("\n")
        assert lines[1] == "query_id,truth_rank,confidence"
        assert len(lines) == 2 + 59


class TestAnnotateSim:
    def test_perfect_oracle_rows(self, dataset_path, tmp_path):
        out = tmp_path / "sim.csv"
        rc = cli.main(
            [
                "annotate-sim", "--dataset", str(dataset_path),
                "--beta", "inf", "--n-sub", "2,3,6,8", "--out", str(out),
            ]
        )
        assert rc == 0
        lines = out.read_text().strip().split("\n")
        rows = [l.split(",") for l in lines[2:]]
        assert len(rows) == 4
        for row in rows:
            assert float(row[3]) == 1.0  # perfect oracle recovers the order

    def test_noise_sweep_monotone_in_beta(self, dataset_path, tmp_path):
        out = tmp_path / "sweep.csv"
        rc = cli.main(
            [
                "annotate-sim", "--dataset", str(dataset_path),
                "--beta", "0,8,inf", "--n-sub", "6", "--seed", "5", "--out", str(out),
            ]
        )
        assert rc == 0
        lines = out.read_text().strip().split("\n")[2:]
        spcs = [float(l.split(",")[3]) for l in lines]
        assert spcs[0] < spcs[2]
        assert spcs[2] == 1.0
