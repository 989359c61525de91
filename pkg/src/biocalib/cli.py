"""Command-line entry points for the study pipeline.

Subcommands: synth, split, tune, train, calibrate, evaluate, report, run.
The `run` subcommand executes the whole study from a JSON config (or a
previous run's manifest); the others expose the individual stages.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict

import numpy as np

from . import __version__
from . import metrics
from .blp import BlpConfig, blp_predict, fit_blp, hidden_design, select_prior_precision
from .calibrate import (ensemble_predict, ensemble_train, load_ensemble,
                        mc_dropout_predict, platt_apply, platt_fit, save_ensemble)
from .data import load_predictions, load_sparse_dataset, save_predictions, save_sparse_dataset
from .folds import (assign_folds, leader_cluster, load_fold_file, make_split,
                    save_fold_file)
from .harness import (SyntheticSpec, evaluate_predictions, load_config,
                      make_synthetic, read_metrics_csv, report_from_rows,
                      run_experiment, write_metrics_csv, write_reliability_csv)
from .mlp import MlpHyperparams, MlpModel, train
from .tuning import GridSpec, grid_search, save_score_table


def _add_split_args(p):
    p.add_argument("--input", required=True, help="sparse feature file")
    p.add_argument("--fold-file", required=True, help="fold assignment file")
    p.add_argument("--test-fold", type=int, default=0)
    p.add_argument("--val-fold", type=int, default=1)


def _load_with_folds(args):
    ds = load_sparse_dataset(args.input)
    ds = ds.with_fold(load_fold_file(args.fold_file, ds))
    return ds, make_split(ds, args.test_fold, args.val_fold)


def _cmd_synth(args):
    spec = SyntheticSpec(n=args.n, dim=args.dim, n_informative=args.informative,
                         overlap=args.overlap, active_ratio=args.active_ratio,
                         background_rate=args.background_rate)
    ds, bayes = make_synthetic(spec, args.seed)
    save_sparse_dataset(ds, args.output)
    with open(args.output + ".bayes.csv", "w", encoding="utf-8") as fh:
        fh.write("id,bayes_prob\n")
        for cid, p in zip(ds.ids, bayes):
            fh.write(f"{cid},{p:.17g}\n")
    print(f"wrote {ds.n} samples (active ratio {ds.active_ratio:.4f}) to {args.output}")


def _cmd_split(args):
    ds = load_sparse_dataset(args.input)
    clusters = leader_cluster(ds, args.threshold, args.seed)
    fold = assign_folds(clusters, args.folds, args.seed)
    ds = ds.with_fold(fold)
    save_fold_file(ds, args.output)
    sizes = np.bincount(fold, minlength=args.folds)
    print(f"{clusters.n_clusters} clusters over {ds.n} samples; "
          f"fold sizes {sizes.tolist()}")


def _cmd_tune(args):
    ds, split = _load_with_folds(args)
    if args.grid:
        with open(args.grid, "r", encoding="utf-8") as fh:
            spec = json.load(fh)
        spec = {k: tuple(v) if isinstance(v, list) else v for k, v in spec.items()}
        grid = GridSpec(**{**spec, "hp_metric": args.metric, "repeats": args.repeats})
    else:
        grid = GridSpec(hp_metric=args.metric, repeats=args.repeats)
    result = grid_search(ds, split, grid, args.seed)
    save_score_table(result, args.table_out)
    with open(args.best_out, "w", encoding="utf-8") as fh:
        json.dump(asdict(result.best), fh, indent=2, sort_keys=True)
    print(f"best cell: hidden={result.best.hidden_size} dropout={result.best.dropout_rate} "
          f"lr={result.best.learning_rate} decay={result.best.weight_decay} "
          f"({result.metric}, {result.direction})")


def _cmd_train(args):
    ds, split = _load_with_folds(args)
    if args.hp_json:
        with open(args.hp_json, "r", encoding="utf-8") as fh:
            hp = MlpHyperparams(**json.load(fh))
        if args.seed is not None:
            hp = MlpHyperparams(**{**asdict(hp), "seed": args.seed})
    else:
        hp = MlpHyperparams(
            hidden_size=args.hidden, dropout_rate=args.dropout,
            learning_rate=args.lr, weight_decay=args.weight_decay,
            max_epochs=args.max_epochs, patience=args.patience,
            batch_size=args.batch_size, seed=args.seed or 0,
        )
    model, trace = train(ds, split, hp)
    model.save(args.output)
    print(f"stopped after epoch {trace.stopped_epoch} "
          f"(best validation BCE {min(trace.val_bce):.6f} at epoch {trace.best_epoch})")


def _cmd_calibrate(args):
    ds, split = _load_with_folds(args)
    if args.method == "ensemble":
        if args.ensemble_dir and not args.train_ensemble:
            ens = load_ensemble(args.ensemble_dir)
        else:
            if not args.hp_json:
                raise ValueError("--hp-json is required to train a fresh ensemble")
            with open(args.hp_json, "r", encoding="utf-8") as fh:
                hp = MlpHyperparams(**json.load(fh))
            ens = ensemble_train(ds, split, hp, args.members, args.seed or 0)
            if args.ensemble_dir:
                save_ensemble(ens, args.ensemble_dir)
        preds = ensemble_predict(ens, ds, split.test)
    else:
        if not args.model:
            raise ValueError(f"--model is required for method {args.method}")
        model = MlpModel.load(args.model)
        if args.method == "platt":
            params = platt_fit(model.predict(ds, split.validation))
            preds = platt_apply(params, model.predict(ds, split.test))
        elif args.method == "mc-dropout":
            preds = mc_dropout_predict(model, ds, split.test, args.passes, args.seed or 0)
        elif args.method == "blp":
            cfg = BlpConfig(n_samples=args.samples, burn_in=args.burn_in,
                            n_leapfrog=args.leapfrog,
                            epsilon=args.epsilon,
                            tau_grid=tuple(args.tau_grid))
            if len(cfg.tau_grid) == 1:
                samples = fit_blp(model, ds, split.train, cfg.tau_grid[0], cfg,
                                  args.seed or 0)
            else:
                sel = select_prior_precision(model, ds, split, cfg.tau_grid, cfg,
                                             args.seed or 0)
                samples = sel.best_samples
                print(f"selected prior precision tau={sel.tau}")
            hidden = hidden_design(model, ds, split.test)
            preds = blp_predict(samples, hidden, ds.labels[split.test])
        else:
            raise ValueError(f"unknown calibration method {args.method}")
    ids = [ds.ids[i] for i in split.test]
    save_predictions(preds, args.output, ids=ids)
    print(f"wrote {preds.n} test predictions to {args.output}")


def _cmd_evaluate(args):
    preds, _ = load_predictions(args.predictions)
    values = evaluate_predictions(preds, args.bins)
    write_metrics_csv([(args.model_name, args.repeat, values)], args.metrics_out)
    _, binned = metrics.calibration_error(preds, metrics.EQUAL_WIDTH, args.bins)
    write_reliability_csv(binned, args.reliability_out)
    print(",".join(f"{k}={v:.6f}" for k, v in values.items()))


def _cmd_report(args):
    rows = []
    for path in args.metrics:
        rows.extend(read_metrics_csv(path))
    report_csv, report_md = report_from_rows(rows, args.target, args.alpha)
    with open(args.csv_out, "w", encoding="utf-8") as fh:
        fh.write(report_csv)
    with open(args.md_out, "w", encoding="utf-8") as fh:
        fh.write(report_md)
    print(report_md)


def _cmd_run(args):
    cfg = load_config(args.config)
    result = run_experiment(cfg)
    print(f"run complete: {len(result.metrics_rows)} method x repeat cells, "
          f"{len(result.failures)} failures, artifacts in {result.output_dir}")
    if result.failures:
        for f in result.failures:
            print(f"  FAILED {f['method']} repeat {f['repeat']}: {f['error']}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="biocalib",
                                 description="bioactivity classifier calibration study")
    ap.add_argument("--version", action="version", version=f"biocalib {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic sparse dataset")
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--dim", type=int, default=256)
    p.add_argument("--informative", type=int, default=16)
    p.add_argument("--overlap", type=float, default=0.5)
    p.add_argument("--active-ratio", type=float, default=0.5)
    p.add_argument("--background-rate", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("split", help="cluster compounds and assign folds")
    p.add_argument("--input", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--threshold", type=float, default=0.6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("tune", help="exhaustive hyperparameter grid search")
    _add_split_args(p)
    p.add_argument("--metric", choices=["acc", "auc", "bce", "ace"], default="bce")
    p.add_argument("--grid", help="JSON file with grid value lists")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--table-out", default="hp_table.csv")
    p.add_argument("--best-out", default="best_hp.json")
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("train", help="train one baseline model")
    _add_split_args(p)
    p.add_argument("--hp-json", help="hyperparameter manifest from `tune`")
    p.add_argument("--hidden", type=int, default=256)
    p.add_argument("--dropout", type=float, default=0.2)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--weight-decay", type=float, default=1e-4)
    p.add_argument("--max-epochs", type=int, default=200)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", required=True, help="model checkpoint (.npz)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("calibrate", help="produce calibrated test predictions")
    _add_split_args(p)
    p.add_argument("--method", required=True,
                   choices=["platt", "mc-dropout", "ensemble", "blp"])
    p.add_argument("--model", help="model checkpoint for platt/mc-dropout/blp")
    p.add_argument("--ensemble-dir", help="ensemble checkpoint directory")
    p.add_argument("--train-ensemble", action="store_true",
                   help="train a fresh ensemble even if --ensemble-dir exists")
    p.add_argument("--hp-json", help="hyperparameters for ensemble training")
    p.add_argument("--members", type=int, default=50)
    p.add_argument("--passes", type=int, default=100)
    p.add_argument("--samples", type=int, default=300)
    p.add_argument("--burn-in", type=int, default=100)
    p.add_argument("--leapfrog", type=int, default=50)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--tau-grid", type=float, nargs="+",
                   default=[0.01, 0.1, 1.0, 10.0, 100.0])
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("evaluate", help="metrics + reliability diagram for predictions")
    p.add_argument("--predictions", required=True)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--model-name", default="model")
    p.add_argument("--repeat", type=int, default=0)
    p.add_argument("--metrics-out", default="metrics.csv")
    p.add_argument("--reliability-out", default="reliability.csv")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("report", help="annotated result tables from metrics CSVs")
    p.add_argument("--metrics", nargs="+", required=True)
    p.add_argument("--target", default="target")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--csv-out", default="report.csv")
    p.add_argument("--md-out", default="report.md")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("run", help="full pipeline from a JSON config or manifest")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_run)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
