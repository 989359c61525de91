"""Full-study orchestration: split, tune, train, calibrate, evaluate, report.

A single declarative JSON config drives the whole pipeline; the run directory
is self-contained (fold file, score table, per-repeat prediction CSVs,
metrics CSV, reliability CSVs, annotated report tables, and a manifest with
every seed and a config hash), so any run can be reproduced bit-exactly from
its manifest.
"""

from __future__ import annotations

import hashlib
import json
import os
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import __version__ as _version
from . import metrics
from .blp import (BlpConfig, blp_predict, hidden_design, save_posterior,
                  select_prior_precision)
from .calibrate import (ensemble_predict, ensemble_train, mc_dropout_predict,
                        platt_apply, platt_fit)
from .data import (LabeledDataset, PredictionSet, SparseBinaryVector, load_sparse_dataset,
                   logit, save_predictions, sigmoid)
from .folds import (assign_folds, leader_cluster, make_split, save_fold_file,
                    DEFAULT_CLUSTER_THRESHOLD)
from .mlp import with_seed, train
from .seeding import derive_seed
from .stats import RepeatResults, render_table
from .tuning import GridSpec, grid_search, save_score_table

METHODS = ("MLP", "MLP+P", "MLP-D", "MLP-E", "MLP-BLP", "MLP-E+P", "MLP-BLP+P")
_BASELINE_FAMILY = {"MLP", "MLP+P", "MLP-D", "MLP-BLP", "MLP-BLP+P"}
_ENSEMBLE_FAMILY = {"MLP-E", "MLP-E+P"}

_SLUGS = {
    "MLP": "mlp", "MLP+P": "mlp-p", "MLP-D": "mlp-d", "MLP-E": "mlp-e",
    "MLP-BLP": "mlp-blp", "MLP-E+P": "mlp-e-p", "MLP-BLP+P": "mlp-blp-p",
}

_METRIC_DIRECTIONS = {
    "ECE": "minimize", "ACE": "minimize", "BS": "minimize",
    "BCE": "minimize", "AUC": "maximize", "ACC": "maximize",
}

WORKERS_ENV = "BIOCALIB_WORKERS"


@dataclass(frozen=True)
class SyntheticSpec:
    """Two-class sparse-feature generator with controllable overlap.

    Each class owns `n_informative` exclusive feature bits; `overlap` in
    [0, 1] mixes the two class-conditional bit distributions (0 = disjoint
    supports and zero Bayes error, 1 = identical distributions). The
    remaining dimensions carry label-independent "chemistry": every sample
    belongs to one of `n_clusters` scaffolds whose prototype bits it
    inherits at `cluster_bit_rate`, so Tanimoto clustering finds real
    structure and fold assignment induces the covariate shift seen with
    cluster-split assay data. Because bits are conditionally independent
    given the class and the scaffold carries no label signal, the
    Bayes-optimal probability of every sample is known exactly.
    """

    n: int = 1000
    dim: int = 256
    n_informative: int = 16
    overlap: float = 0.5
    active_ratio: float = 0.5
    n_clusters: int = 50
    cluster_bits: int = 12
    cluster_bit_rate: float = 0.9
    background_rate: float = 0.005

    def __post_init__(self):
        if self.n < 2 or self.dim < 2 * self.n_informative or self.n_informative < 1:
            raise ValueError("invalid synthetic geometry")
        if not (0.0 <= self.overlap <= 1.0):
            raise ValueError("overlap must lie in [0, 1]")
        if not (0.0 < self.active_ratio < 1.0):
            raise ValueError("active_ratio must lie in (0, 1)")
        if self.n_clusters < 1 or self.cluster_bits < 0:
            raise ValueError("invalid scaffold structure")
        if not (0.0 <= self.background_rate < 1.0):
            raise ValueError("background_rate must lie in [0, 1)")
        if not (0.0 < self.cluster_bit_rate <= 1.0):
            raise ValueError("cluster_bit_rate must lie in (0, 1]")


def make_synthetic(spec: SyntheticSpec, seed: int = 0):
    """Deterministic synthetic dataset; returns (dataset, bayes_probs)."""
    rng = np.random.default_rng(seed)
    labels = (rng.random(spec.n) < spec.active_ratio).astype(np.int64)
    if labels.min() == labels.max():
        raise ValueError("synthetic draw produced a single class; change seed or n")

    k = spec.n_informative
    lam = spec.overlap
    q1 = np.full(spec.dim, spec.background_rate)
    q0 = np.full(spec.dim, spec.background_rate)
    # informative bits: class 1 owns [0, k), class 0 owns [k, 2k)
    q1[:k], q1[k:2 * k] = 1.0 - lam / 2.0, lam / 2.0
    q0[:k], q0[k:2 * k] = lam / 2.0, 1.0 - lam / 2.0

    draws = rng.random((spec.n, spec.dim))
    rates = np.where(labels[:, None] == 1, q1[None, :], q0[None, :])
    X = draws < rates

    # scaffold bits: cluster membership is independent of the label, so the
    # posterior below stays exact
    n_scaffold_dims = spec.dim - 2 * k
    if n_scaffold_dims > 0 and spec.cluster_bits > 0:
        cluster_of = rng.integers(spec.n_clusters, size=spec.n)
        proto = np.zeros((spec.n_clusters, n_scaffold_dims), dtype=bool)
        for c in range(spec.n_clusters):
            picks = rng.choice(n_scaffold_dims, size=min(spec.cluster_bits, n_scaffold_dims),
                               replace=False)
            proto[c, picks] = True
        keep = rng.random((spec.n, n_scaffold_dims)) < spec.cluster_bit_rate
        X[:, 2 * k:] |= proto[cluster_of] & keep

    # exact posterior from the known generator (bits independent given class)
    c1 = np.clip(q1[:2 * k], 1e-12, 1.0 - 1e-12)
    c0 = np.clip(q0[:2 * k], 1e-12, 1.0 - 1e-12)
    w_on = np.log(c1 / c0)
    w_off = np.log((1.0 - c1) / (1.0 - c0))
    Xi = X[:, :2 * k].astype(np.float64)
    log_odds = logit(spec.active_ratio) + Xi @ w_on + (1.0 - Xi) @ w_off
    bayes = sigmoid(log_odds)

    vectors = [SparseBinaryVector(spec.dim, np.flatnonzero(row)) for row in X]
    ids = [f"synth-{i:06d}" for i in range(spec.n)]
    return LabeledDataset(vectors, labels, ids), bayes


@dataclass
class RunConfig:
    """Declarative description of one full study run."""

    dataset: str
    output_dir: str
    methods: tuple = METHODS
    repeats: int = 10
    ensemble_repeats: int = 5
    ensemble_size: int = 50
    dropout_passes: int = 100
    test_fold: int = 0
    val_fold: int = 1
    fold_seed: int = 0
    cluster_threshold: float = DEFAULT_CLUSTER_THRESHOLD
    grid: GridSpec = field(default_factory=GridSpec)
    blp: BlpConfig = field(default_factory=BlpConfig)
    n_bins: int = metrics.DEFAULT_BINS
    seed: int = 0
    target_label: str = "target"

    def __post_init__(self):
        self.methods = tuple(self.methods)
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; choose from {METHODS}")
        if self.repeats < 1 or self.ensemble_repeats < 1:
            raise ValueError("repeats must be >= 1")
        if isinstance(self.grid, dict):
            self.grid = GridSpec(**self.grid)
        if isinstance(self.blp, dict):
            blp = dict(self.blp)
            if "tau_grid" in blp:
                blp["tau_grid"] = tuple(blp["tau_grid"])
            self.blp = BlpConfig(**blp)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        d["grid"] = asdict(self.grid)
        d["blp"] = asdict(self.blp)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        if "grid" in d and isinstance(d["grid"], dict):
            d["grid"] = GridSpec(**{k: tuple(v) if isinstance(v, list) else v
                                    for k, v in d["grid"].items()})
        return cls(**d)

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config(path) -> RunConfig:
    """Read a config file; a run manifest (with a 'config' key) also works."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if "config" in payload and isinstance(payload["config"], dict):
        payload = payload["config"]
    return RunConfig.from_dict(payload)


def _fmt(x) -> str:
    return format(float(x), ".17g")


def evaluate_predictions(preds: PredictionSet, n_bins: int = metrics.DEFAULT_BINS) -> dict:
    """All reported metrics for one prediction set."""
    ece, _ = metrics.calibration_error(preds, metrics.EQUAL_WIDTH, n_bins)
    ace, _ = metrics.calibration_error(preds, metrics.EQUAL_COUNT, n_bins)
    return {
        "ECE": ece,
        "ACE": ace,
        "BS": metrics.brier(preds),
        "BCE": metrics.bce_loss(preds),
        "AUC": metrics.auc(preds),
        "ACC": metrics.accuracy(preds),
    }


def write_metrics_csv(rows, path) -> None:
    """rows: (model, repeat, {metric: value}) in a deterministic order."""
    cols = ["ECE", "ACE", "BS", "BCE", "AUC", "ACC"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("model,repeat," + ",".join(cols) + "\n")
        for model, repeat, values in rows:
            fh.write(f"{model},{repeat}," + ",".join(_fmt(values[c]) for c in cols) + "\n")


def read_metrics_csv(path):
    """Inverse of write_metrics_csv; returns (model, repeat, values) rows."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header[:2] != ["model", "repeat"]:
            raise ValueError(f"{path}: not a metrics CSV")
        cols = header[2:]
        for line in fh:
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            values = {c: float(v) for c, v in zip(cols, cells[2:])}
            rows.append((cells[0], int(cells[1]), values))
    return rows


def write_reliability_csv(binned, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("bin_lo,bin_hi,confidence,accuracy,count\n")
        for lo, hi, conf, acc, c in metrics.reliability_rows(binned):
            fh.write(f"{_fmt(lo)},{_fmt(hi)},{_fmt(conf)},{_fmt(acc)},{c}\n")


def _n_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _map_tasks(fn, keys):
    """Run fn over keys, possibly in a thread pool; results in key order."""
    workers = _n_workers()
    if workers == 1 or len(keys) <= 1:
        return [fn(k) for k in keys]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, keys))


@dataclass
class RunResult:
    output_dir: str
    metrics_rows: list
    failures: list
    report_csv: str
    report_md: str


def run_experiment(cfg: RunConfig) -> RunResult:
    """Execute the full study described by `cfg`.

    Per-method-per-repeat failures are recorded and the run completes with
    partial results; only configuration-level problems (bad dataset, bad
    split) abort the run.
    """
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    os.makedirs(os.path.join(out, "predictions"), exist_ok=True)
    os.makedirs(os.path.join(out, "reliability"), exist_ok=True)
    platt_params_used = {}

    ds = load_sparse_dataset(cfg.dataset)
    if ds.fold is None:
        clusters = leader_cluster(ds, cfg.cluster_threshold, cfg.fold_seed)
        ds = ds.with_fold(assign_folds(clusters, seed=cfg.fold_seed))
    save_fold_file(ds, os.path.join(out, "folds.txt"))
    split = make_split(ds, cfg.test_fold, cfg.val_fold)
    ds.feature_matrix()  # build the shared CSR cache before workers start

    gs = grid_search(ds, split, cfg.grid, derive_seed(cfg.seed, "grid"))
    save_score_table(gs, os.path.join(out, "hp_table.csv"))
    with open(os.path.join(out, "best_hp.json"), "w", encoding="utf-8") as fh:
        json.dump(asdict(gs.best), fh, indent=2, sort_keys=True)

    test_ids = [ds.ids[i] for i in split.test]
    failures = []
    seeds_used = {}

    # baseline models shared by MLP, MLP+P, MLP-D, MLP-BLP, MLP-BLP+P; a
    # failed shared stage is recorded against every method that needs it
    need_baseline = any(m in _BASELINE_FAMILY for m in cfg.methods)
    baselines = {}
    if need_baseline:
        def _train_baseline(r):
            s = derive_seed(cfg.seed, "baseline", r)
            try:
                return r, s, train(ds, split, with_seed(gs.best, s))[0]
            except Exception as exc:
                return r, s, exc
        for r, s, model in _map_tasks(_train_baseline, list(range(cfg.repeats))):
            baselines[r] = model
            seeds_used[f"baseline/{r}"] = s

    ensembles = {}
    if any(m in _ENSEMBLE_FAMILY for m in cfg.methods):
        def _train_ensemble(r):
            s = derive_seed(cfg.seed, "ensemble", r)
            try:
                return r, s, ensemble_train(ds, split, gs.best, cfg.ensemble_size, s)
            except Exception as exc:
                return r, s, exc
        for r, s, ens in _map_tasks(_train_ensemble, list(range(cfg.ensemble_repeats))):
            ensembles[r] = ens
            seeds_used[f"ensemble/{r}"] = s

    def _baseline(r):
        model = baselines[r]
        if isinstance(model, Exception):
            raise RuntimeError(f"baseline training failed: {model}") from model
        return model

    def _ensemble(r):
        ens = ensembles[r]
        if isinstance(ens, Exception):
            raise RuntimeError(f"ensemble training failed: {ens}") from ens
        return ens

    blp_cache = {}

    def _blp_for(r):
        if r not in blp_cache:
            sel_seed = derive_seed(cfg.seed, "blp", r)
            seeds_used[f"blp/{r}"] = sel_seed
            sel = select_prior_precision(_baseline(r), ds, split, cfg.blp.tau_grid,
                                         cfg.blp, sel_seed)
            blp_cache[r] = sel
        return blp_cache[r]

    def _fit_platt(method, r, calib_preds):
        params = platt_fit(calib_preds)
        platt_params_used[f"{_SLUGS[method]}/{r}"] = {
            "a": params.a, "b": params.b, "converged": params.converged,
        }
        return params

    def _predict(method, r):
        if method == "MLP":
            return _baseline(r).predict(ds, split.test)
        if method == "MLP+P":
            params = _fit_platt(method, r, _baseline(r).predict(ds, split.validation))
            return platt_apply(params, _baseline(r).predict(ds, split.test))
        if method == "MLP-D":
            s = derive_seed(cfg.seed, "mc-dropout", r)
            seeds_used[f"mc-dropout/{r}"] = s
            return mc_dropout_predict(_baseline(r), ds, split.test,
                                      cfg.dropout_passes, s)
        if method == "MLP-E":
            return ensemble_predict(_ensemble(r), ds, split.test)
        if method == "MLP-E+P":
            params = _fit_platt(method, r,
                                ensemble_predict(_ensemble(r), ds, split.validation))
            return platt_apply(params, ensemble_predict(_ensemble(r), ds, split.test))
        if method == "MLP-BLP":
            sel = _blp_for(r)
            hidden = hidden_design(_baseline(r), ds, split.test)
            return blp_predict(sel.best_samples, hidden, ds.labels[split.test])
        if method == "MLP-BLP+P":
            sel = _blp_for(r)
            val_hidden = hidden_design(_baseline(r), ds, split.validation)
            val_pred = blp_predict(sel.best_samples, val_hidden, ds.labels[split.validation])
            params = _fit_platt(method, r, val_pred)
            hidden = hidden_design(_baseline(r), ds, split.test)
            return platt_apply(params, blp_predict(sel.best_samples, hidden,
                                                   ds.labels[split.test]))
        raise ValueError(f"unknown method {method}")

    metrics_rows = []
    for method in cfg.methods:
        n_rep = cfg.ensemble_repeats if method in _ENSEMBLE_FAMILY else cfg.repeats
        for r in range(n_rep):
            try:
                preds = _predict(method, r)
            except Exception as exc:  # record and continue with other cells
                failures.append({"method": method, "repeat": r, "error": str(exc),
                                 "trace": traceback.format_exc()})
                continue
            slug = _SLUGS[method]
            save_predictions(preds, os.path.join(out, "predictions", f"{slug}_rep{r}.csv"),
                             ids=test_ids)
            _, binned = metrics.calibration_error(preds, metrics.EQUAL_WIDTH, cfg.n_bins)
            write_reliability_csv(binned, os.path.join(out, "reliability",
                                                       f"{slug}_rep{r}.csv"))
            metrics_rows.append((method, r, evaluate_predictions(preds, cfg.n_bins)))

    write_metrics_csv(metrics_rows, os.path.join(out, "metrics.csv"))

    report_csv, report_md = report_from_rows(metrics_rows, cfg.target_label)
    with open(os.path.join(out, "report.csv"), "w", encoding="utf-8") as fh:
        fh.write(report_csv)
    with open(os.path.join(out, "report.md"), "w", encoding="utf-8") as fh:
        fh.write(report_md)

    # persist BLP posteriors with their diagnostics headers
    if blp_cache:
        os.makedirs(os.path.join(out, "posteriors"), exist_ok=True)
        for r, sel in sorted(blp_cache.items()):
            save_posterior(sel.best_samples,
                           os.path.join(out, "posteriors", f"mlp-blp_rep{r}.txt"))

    manifest = {
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "package_version": _version,
        "seeds": seeds_used,
        "platt_params": platt_params_used,
        "n_failures": len(failures),
    }
    with open(os.path.join(out, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    if failures:
        with open(os.path.join(out, "failures.json"), "w", encoding="utf-8") as fh:
            json.dump(failures, fh, indent=2)

    return RunResult(out, metrics_rows, failures, report_csv, report_md)


def method_family(method: str) -> str | None:
    if method in _BASELINE_FAMILY:
        return "baseline"
    if method in _ENSEMBLE_FAMILY:
        return "ensemble"
    return None


def report_from_rows(metrics_rows, target_label: str, alpha: float = 0.05):
    """Annotated tables (csv, markdown) from metrics rows of one target."""
    by_model = {}
    for model, repeat, values in metrics_rows:
        by_model.setdefault(model, []).append((repeat, values))
    results = []
    for model, entries in by_model.items():
        entries.sort()
        for metric, direction in _METRIC_DIRECTIONS.items():
            vals = np.array([values[metric] for _, values in entries])
            results.append(RepeatResults(model, metric, vals, direction,
                                         family=method_family(model)))
    table = {target_label: results}
    return (render_table(table, "csv", alpha), render_table(table, "markdown", alpha))
