"""End-to-end CLI coverage over a small synthetic study."""

import json
import os

import numpy as np
import pytest

from biocalib.cli import main
from biocalib.data import load_predictions, load_sparse_dataset
from biocalib.harness import read_metrics_csv


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    rc = main(["synth", "--n", "400", "--dim", "64", "--informative", "8",
               "--overlap", "0.5", "--active-ratio", "0.4", "--seed", "3",
               "--output", str(root / "data.sparse")])
    assert rc == 0
    rc = main(["split", "--input", str(root / "data.sparse"), "--threshold", "0.5",
               "--seed", "1", "--output", str(root / "folds.txt")])
    assert rc == 0
    return root


def common(root):
    return ["--input", str(root / "data.sparse"), "--fold-file", str(root / "folds.txt"),
            "--test-fold", "0", "--val-fold", "1"]


class TestCliPipeline:
    def test_synth_writes_bayes_sidecar(self, workdir):
        ds = load_sparse_dataset(workdir / "data.sparse")
        assert ds.n == 400
        sidecar = (workdir / "data.sparse.bayes.csv").read_text().splitlines()
        assert sidecar[0] == "id,bayes_prob"
        assert len(sidecar) == 401

    def test_split_covers_every_id(self, workdir):
        lines = (workdir / "folds.txt").read_text().strip().splitlines()
        assert len(lines) == 400
        folds = {int(l.split()[1]) for l in lines}
        assert folds <= {0, 1, 2, 3, 4}

    def test_tune_then_train_then_calibrate_then_evaluate(self, workdir):
        grid = {"hidden_sizes": [4], "dropout_rates": [0.3],
                "learning_rates": [0.01], "weight_decays": [0.0001],
                "max_epochs": 4, "patience": 4, "batch_size": 64}
        grid_path = workdir / "grid.json"
        grid_path.write_text(json.dumps(grid))
        rc = main(["tune", *common(workdir), "--metric", "bce", "--repeats", "1",
                   "--grid", str(grid_path), "--seed", "5",
                   "--table-out", str(workdir / "hp_table.csv"),
                   "--best-out", str(workdir / "best_hp.json")])
        assert rc == 0
        assert (workdir / "hp_table.csv").exists()

        rc = main(["train", *common(workdir), "--hp-json", str(workdir / "best_hp.json"),
                   "--seed", "7", "--output", str(workdir / "model.npz")])
        assert rc == 0

        rc = main(["calibrate", *common(workdir), "--method", "platt",
                   "--model", str(workdir / "model.npz"),
                   "--output", str(workdir / "platt.csv")])
        assert rc == 0
        preds, ids = load_predictions(workdir / "platt.csv")
        assert ids is not None and preds.n == len(ids)

        rc = main(["evaluate", "--predictions", str(workdir / "platt.csv"),
                   "--bins", "10", "--model-name", "MLP+P", "--repeat", "0",
                   "--metrics-out", str(workdir / "metrics.csv"),
                   "--reliability-out", str(workdir / "reliability.csv")])
        assert rc == 0
        rows = read_metrics_csv(workdir / "metrics.csv")
        assert rows[0][0] == "MLP+P"
        rel = (workdir / "reliability.csv").read_text().splitlines()
        assert rel[0] == "bin_lo,bin_hi,confidence,accuracy,count"
        assert len(rel) == 11  # 10 equal-width bins

    def test_blp_calibrate_subcommand(self, workdir):
        rc = main(["train", *common(workdir), "--hidden", "4", "--dropout", "0.0",
                   "--lr", "0.01", "--weight-decay", "0.0", "--max-epochs", "3",
                   "--patience", "3", "--seed", "2",
                   "--output", str(workdir / "m2.npz")])
        assert rc == 0
        rc = main(["calibrate", *common(workdir), "--method", "blp",
                   "--model", str(workdir / "m2.npz"), "--samples", "30",
                   "--burn-in", "10", "--leapfrog", "8", "--tau-grid", "1.0",
                   "--seed", "3", "--output", str(workdir / "blp.csv")])
        assert rc == 0
        preds, _ = load_predictions(workdir / "blp.csv")
        assert np.all((preds.probs > 0) & (preds.probs < 1))

    def test_report_subcommand(self, workdir, capsys):
        rows_a = "model,repeat,ECE,ACE,BS,BCE,AUC,ACC\n" + "\n".join(
            f"MLP,{r},0.05,0.04,0.2,0.5,0.8,0.7" for r in range(3)) + "\n"
        rows_b = "model,repeat,ECE,ACE,BS,BCE,AUC,ACC\n" + "\n".join(
            f"MLP+P,{r},0.02,0.02,0.19,0.45,0.8,0.7" for r in range(3)) + "\n"
        (workdir / "ma.csv").write_text(rows_a)
        (workdir / "mb.csv").write_text(rows_b)
        rc = main(["report", "--metrics", str(workdir / "ma.csv"), str(workdir / "mb.csv"),
                   "--target", "demo", "--csv-out", str(workdir / "report.csv"),
                   "--md-out", str(workdir / "report.md")])
        assert rc == 0
        text = (workdir / "report.csv").read_text()
        assert "demo,MLP+P,ECE,0.0200,0.0000,best" in text

    def test_run_subcommand(self, workdir):
        cfg = {
            "dataset": str(workdir / "data.sparse"),
            "output_dir": str(workdir / "run"),
            "methods": ["MLP", "MLP+P"],
            "repeats": 2,
            "ensemble_repeats": 2,
            "ensemble_size": 2,
            "dropout_passes": 5,
            "grid": {"hidden_sizes": [4], "dropout_rates": [0.2],
                     "learning_rates": [0.01], "weight_decays": [0.0001],
                     "repeats": 1, "max_epochs": 3, "patience": 3, "batch_size": 64},
            "blp": {"n_samples": 20, "burn_in": 10, "n_leapfrog": 6, "tau_grid": [1.0]},
            "seed": 9,
            "target_label": "demo",
        }
        cfg_path = workdir / "config.json"
        cfg_path.write_text(json.dumps(cfg))
        rc = main(["run", "--config", str(cfg_path)])
        assert rc == 0
        assert os.path.exists(workdir / "run" / "report.md")

    def test_error_reported_as_exit_code(self, workdir, capsys):
        rc = main(["split", "--input", str(workdir / "missing.sparse"),
                   "--output", str(workdir / "nope.txt")])
        assert rc == 1
        assert "error:" in capsys.readouterr().err
