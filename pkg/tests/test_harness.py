"""Synthetic generator guarantees and full-pipeline orchestration."""

import json
import os

import numpy as np
import pytest

from biocalib.data import load_sparse_dataset, save_sparse_dataset
from biocalib.folds import assign_folds, leader_cluster, make_split
from biocalib.harness import (
    RunConfig,
    SyntheticSpec,
    make_synthetic,
    read_metrics_csv,
    run_experiment,
    write_metrics_csv,
)
from biocalib.metrics import auc
from biocalib.mlp import MlpHyperparams, train
from biocalib.tuning import GridSpec


class TestMakeSynthetic:
    def test_deterministic(self):
        spec = SyntheticSpec(n=200, dim=64, n_informative=8)
        a, pa = make_synthetic(spec, seed=5)
        b, pb = make_synthetic(spec, seed=5)
        assert a == b
        assert np.array_equal(pa, pb)

    def test_zero_overlap_is_separable(self):
        spec = SyntheticSpec(n=400, dim=64, n_informative=8, overlap=0.0,
                             n_clusters=10, cluster_bits=6)
        ds, bayes = make_synthetic(spec, seed=1)
        # Bayes-optimal probabilities are 0/1: zero Bayes error
        assert np.all((bayes > 1 - 1e-6) == (ds.labels == 1))
        ds = ds.with_fold(np.arange(ds.n) % 5)
        split = make_split(ds, 0, 1)
        hp = MlpHyperparams(hidden_size=8, learning_rate=1e-2, max_epochs=30,
                            patience=30, batch_size=64, seed=2)
        model, _ = train(ds, split, hp)
        assert auc(model.predict(ds, split.test)) > 0.99

    def test_full_overlap_gives_base_rate_probs(self):
        spec = SyntheticSpec(n=300, dim=64, n_informative=8, overlap=1.0,
                             active_ratio=0.5)
        _, bayes = make_synthetic(spec, seed=3)
        assert np.allclose(bayes, 0.5, atol=1e-12)

    def test_active_ratio_concentrates(self):
        spec = SyntheticSpec(n=10_000, dim=64, n_informative=8, active_ratio=0.08)
        ds, _ = make_synthetic(spec, seed=4)
        assert abs(ds.active_ratio - 0.08) <= 0.01

    def test_cluster_structure_recovered_by_tanimoto(self):
        spec = SyntheticSpec(n=300, dim=256, n_informative=4, overlap=1.0,
                             n_clusters=12, cluster_bits=20, cluster_bit_rate=1.0,
                             background_rate=0.0)
        ds, _ = make_synthetic(spec, seed=6)
        clusters = leader_cluster(ds, 0.35, seed=1)
        # far fewer clusters than samples: scaffold structure is visible
        assert clusters.n_clusters < 60

    def test_round_trips_through_sparse_format(self, tmp_path):
        spec = SyntheticSpec(n=50, dim=32, n_informative=4)
        ds, _ = make_synthetic(spec, seed=7)
        path = tmp_path / "synth.sparse"
        save_sparse_dataset(ds, path)
        assert load_sparse_dataset(path) == ds


def tiny_run_config(tmp_path, methods, **overrides):
    spec = SyntheticSpec(n=600, dim=96, n_informative=8, overlap=0.6,
                         active_ratio=0.4, n_clusters=30, cluster_bits=8)
    ds, _ = make_synthetic(spec, seed=11)
    data_path = str(tmp_path / "data.sparse")
    save_sparse_dataset(ds, data_path)
    grid = GridSpec(hidden_sizes=(6,), dropout_rates=(0.2,), learning_rates=(1e-2,),
                    weight_decays=(1e-4,), repeats=1, hp_metric="bce",
                    max_epochs=5, patience=5, batch_size=64)
    from biocalib.blp import BlpConfig
    cfg = dict(
        dataset=data_path,
        output_dir=str(tmp_path / "run"),
        methods=methods,
        repeats=3,
        ensemble_repeats=2,
        ensemble_size=2,
        dropout_passes=10,
        grid=grid,
        blp=BlpConfig(n_samples=40, burn_in=15, n_leapfrog=8, tau_grid=(1.0,)),
        seed=123,
        target_label="synthetic",
    )
    cfg.update(overrides)
    return RunConfig(**cfg)


class TestRunConfig:
    def test_unknown_method_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            tiny_run_config(tmp_path, methods=("MLP", "SVM"))

    def test_json_round_trip(self, tmp_path):
        cfg = tiny_run_config(tmp_path, methods=("MLP",))
        restored = RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert restored.config_hash() == cfg.config_hash()


class TestRunExperiment:
    def test_mlp_only_structure(self, tmp_path):
        cfg = tiny_run_config(tmp_path, methods=("MLP",))
        result = run_experiment(cfg)
        assert not result.failures
        out = cfg.output_dir
        preds = sorted(os.listdir(os.path.join(out, "predictions")))
        assert preds == [f"mlp_rep{r}.csv" for r in range(3)]
        for name in ("metrics.csv", "report.csv", "report.md", "manifest.json",
                     "folds.txt", "hp_table.csv", "best_hp.json"):
            assert os.path.exists(os.path.join(out, name))
        rows = read_metrics_csv(os.path.join(out, "metrics.csv"))
        assert [(m, r) for m, r, _ in rows] == [("MLP", 0), ("MLP", 1), ("MLP", 2)]

    def test_platt_preserves_auc_column(self, tmp_path):
        cfg = tiny_run_config(tmp_path, methods=("MLP", "MLP+P"))
        result = run_experiment(cfg)
        rows = result.metrics_rows
        mlp = {r: v for m, r, v in rows if m == "MLP"}
        platt = {r: v for m, r, v in rows if m == "MLP+P"}
        for r in mlp:
            assert platt[r]["AUC"] == mlp[r]["AUC"]
            assert platt[r]["ECE"] != mlp[r]["ECE"]

    def test_full_method_set_and_single_best(self, tmp_path):
        cfg = tiny_run_config(tmp_path, methods=(
            "MLP", "MLP+P", "MLP-D", "MLP-E", "MLP-BLP", "MLP-E+P", "MLP-BLP+P"))
        result = run_experiment(cfg)
        assert not result.failures
        methods_seen = {m for m, _, _ in result.metrics_rows}
        assert len(methods_seen) == 7
        # fitted Platt parameters land in the manifest; posteriors on disk
        manifest = json.load(open(os.path.join(cfg.output_dir, "manifest.json")))
        assert "mlp-p/0" in manifest["platt_params"]
        assert "mlp-blp-p/0" in manifest["platt_params"]
        from biocalib.blp import load_posterior
        post = load_posterior(os.path.join(cfg.output_dir, "posteriors",
                                           "mlp-blp_rep0.txt"))
        assert post.samples.shape[0] == cfg.blp.n_samples
        # ensembles get 2 repeats, the rest 3
        counts = {}
        for m, _, _ in result.metrics_rows:
            counts[m] = counts.get(m, 0) + 1
        assert counts["MLP-E"] == 2 and counts["MLP-E+P"] == 2
        assert counts["MLP"] == 3
        # exactly one best per metric row group in the csv report
        best_lines = [l for l in result.report_csv.splitlines() if l.endswith(",best")]
        metrics_in_report = {l.split(",")[2] for l in best_lines}
        assert len(best_lines) == len(metrics_in_report)

    def test_manifest_rerun_reproduces_metrics_bit_exactly(self, tmp_path):
        cfg = tiny_run_config(tmp_path, methods=("MLP", "MLP-D"))
        run_experiment(cfg)
        first = open(os.path.join(cfg.output_dir, "metrics.csv")).read()
        # re-run from the manifest into a fresh directory
        manifest_path = os.path.join(cfg.output_dir, "manifest.json")
        from biocalib.harness import load_config
        cfg2 = load_config(manifest_path)
        cfg2.output_dir = str(tmp_path / "run2")
        run_experiment(cfg2)
        second = open(os.path.join(cfg2.output_dir, "metrics.csv")).read()
        assert first == second

    def test_partial_failure_recorded(self, tmp_path):
        # ensemble methods cannot run with a single-member configuration
        cfg = tiny_run_config(tmp_path, methods=("MLP", "MLP-E"), ensemble_size=1)
        result = run_experiment(cfg)
        assert any(f["method"] == "MLP-E" for f in result.failures)
        assert any(m == "MLP" for m, _, _ in result.metrics_rows)
        assert os.path.exists(os.path.join(cfg.output_dir, "failures.json"))

    def test_report_regenerates_from_metrics_csv_alone(self, tmp_path):
        # the run directory is self-contained: the written metrics CSV is
        # enough to reproduce the annotated report without recomputation
        from biocalib.harness import report_from_rows
        cfg = tiny_run_config(tmp_path, methods=("MLP", "MLP+P"))
        result = run_experiment(cfg)
        rows = read_metrics_csv(os.path.join(cfg.output_dir, "metrics.csv"))
        csv_again, md_again = report_from_rows(rows, cfg.target_label)
        assert csv_again == result.report_csv
        assert md_again == result.report_md

    def test_worker_pool_is_deterministic(self, tmp_path, monkeypatch):
        from biocalib.harness import WORKERS_ENV
        cfg = tiny_run_config(tmp_path, methods=("MLP", "MLP-D"))
        run_experiment(cfg)
        serial = open(os.path.join(cfg.output_dir, "metrics.csv")).read()
        monkeypatch.setenv(WORKERS_ENV, "3")
        cfg2 = tiny_run_config(tmp_path, methods=("MLP", "MLP-D"),
                               output_dir=str(tmp_path / "run-parallel"))
        run_experiment(cfg2)
        parallel = open(os.path.join(cfg2.output_dir, "metrics.csv")).read()
        assert serial == parallel


class TestMetricsCsv:
    def test_round_trip(self, tmp_path):
        rows = [("MLP", 0, {"ECE": 0.1, "ACE": 0.09, "BS": 0.2, "BCE": 0.5,
                            "AUC": 0.9, "ACC": 0.8})]
        path = tmp_path / "m.csv"
        write_metrics_csv(rows, path)
        back = read_metrics_csv(path)
        assert back == rows
