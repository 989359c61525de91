"""Exhaustive grid search over the four network hyperparameters.

Every grid cell trains `repeats` models with derived seeds; the selection
metric is computed on the validation split and averaged over the repeats.
Seeds derive from the cell's parameter values, so the outcome does not
depend on enumeration order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .data import LabeledDataset, PredictionSet, Split
from .mlp import MlpHyperparams, TrainingDiverged, train
from .seeding import derive_seed

HP_METRICS = ("acc", "auc", "bce", "ace")
_MINIMIZE = {"bce": True, "ace": True, "acc": False, "auc": False}


def evaluate_hp_metric(preds: PredictionSet, metric: str, n_bins: int = metrics.DEFAULT_BINS):
    """Score predictions with one of the selection metrics.

    Returns (value, direction) where direction is "minimize" or "maximize".
    """
    metric = metric.lower()
    if metric not in HP_METRICS:
        raise ValueError(f"unknown HP metric {metric!r}; choose from {HP_METRICS}")
    if metric == "acc":
        value = metrics.accuracy(preds)
    elif metric == "auc":
        value = metrics.auc(preds)
    elif metric == "bce":
        value = metrics.bce_loss(preds)
    else:
        value, _ = metrics.calibration_error(preds, metrics.EQUAL_COUNT, n_bins)
    return value, ("minimize" if _MINIMIZE[metric] else "maximize")


@dataclass(frozen=True)
class GridSpec:
    """Value lists for the four tuned hyperparameters plus the protocol knobs."""

    hidden_sizes: tuple = (64, 256, 1024)
    dropout_rates: tuple = (0.2, 0.4, 0.6)
    learning_rates: tuple = (1e-4, 1e-3)
    weight_decays: tuple = (1e-6, 1e-4, 1e-2)
    repeats: int = 10
    hp_metric: str = "bce"
    n_bins: int = metrics.DEFAULT_BINS
    max_epochs: int = 200
    patience: int = 10
    batch_size: int = 128

    def __post_init__(self):
        for name in ("hidden_sizes", "dropout_rates", "learning_rates", "weight_decays"):
            values = getattr(self, name)
            object.__setattr__(self, name, tuple(values))
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.hp_metric.lower() not in HP_METRICS:
            raise ValueError(f"hp_metric must be one of {HP_METRICS}")
        object.__setattr__(self, "hp_metric", self.hp_metric.lower())

    def cells(self):
        return list(itertools.product(self.hidden_sizes, self.dropout_rates,
                                      self.learning_rates, self.weight_decays))


@dataclass
class GridSearchResult:
    best: MlpHyperparams
    metric: str
    direction: str
    table: list            # (hidden, dropout, lr, decay, repeat, value) per training
    cell_scores: dict      # cell tuple -> mean metric over repeats
    failures: list = field(default_factory=list)  # (cell, repeat, error)


def grid_search(ds: LabeledDataset, split: Split, grid: GridSpec, seed: int = 0) -> GridSearchResult:
    """Train every cell x repeat, average the validation metric, return the best.

    Ties prefer the smaller hidden size, then the larger weight decay
    (stronger regularization), then lexical order of the remaining values.
    A cell with any failed training is recorded and excluded from selection;
    it is fatal only if every cell fails.
    """
    table = []
    failures = []
    cell_scores = {}
    direction = "minimize" if _MINIMIZE[grid.hp_metric] else "maximize"
    for cell in grid.cells():
        hidden, dropout, lr, decay = cell
        values = []
        failed = False
        for rep in range(grid.repeats):
            hp = MlpHyperparams(
                hidden_size=hidden, dropout_rate=dropout, learning_rate=lr,
                weight_decay=decay, max_epochs=grid.max_epochs,
                patience=grid.patience, batch_size=grid.batch_size,
                seed=derive_seed(seed, "grid", hidden, dropout, lr, decay, rep),
            )
            try:
                model, _ = train(ds, split, hp)
                preds = model.predict(ds, split.validation)
                value, _ = evaluate_hp_metric(preds, grid.hp_metric, grid.n_bins)
            except (TrainingDiverged, ValueError) as exc:
                failures.append((cell, rep, str(exc)))
                failed = True
                continue
            values.append(value)
            table.append((hidden, dropout, lr, decay, rep, value))
        if values and not failed:
            cell_scores[cell] = float(np.mean(values))
    if not cell_scores:
        raise RuntimeError("every grid cell failed to train")

    sign = 1.0 if direction == "minimize" else -1.0

    def rank_key(cell):
        hidden, dropout, lr, decay = cell
        return (sign * cell_scores[cell], hidden, -decay, dropout, lr)

    best_cell = min(cell_scores, key=rank_key)
    hidden, dropout, lr, decay = best_cell
    best = MlpHyperparams(
        hidden_size=hidden, dropout_rate=dropout, learning_rate=lr, weight_decay=decay,
        max_epochs=grid.max_epochs, patience=grid.patience, batch_size=grid.batch_size,
        seed=derive_seed(seed, "grid", hidden, dropout, lr, decay, 0),
    )
    return GridSearchResult(best, grid.hp_metric, direction, table, cell_scores, failures)


def save_score_table(result: GridSearchResult, path) -> None:
    """Score table CSV: one row per cell x repeat."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("hidden_size,dropout_rate,learning_rate,weight_decay,repeat,value\n")
        for hidden, dropout, lr, decay, rep, value in result.table:
            fh.write(f"{hidden},{dropout:.17g},{lr:.17g},{decay:.17g},{rep},{value:.17g}\n")
