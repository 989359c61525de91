"""Training the baseline network and reading its evaluation metrics.

The model is a two-layer net on sparse binary inputs: ReLU hidden layer,
dropout in between, sigmoid output. Training = Adam-style updates with
decoupled weight decay and early stopping on validation cross entropy.

Run:  python demos/02_train_and_evaluate_mlp.py
"""

import numpy as np

from biocalib import (
    MlpHyperparams,
    SyntheticSpec,
    accuracy,
    assign_folds,
    auc,
    bce_loss,
    brier,
    brier_decomposition,
    calibration_error,
    leader_cluster,
    make_split,
    make_synthetic,
    train,
)

spec = SyntheticSpec(n=3000, dim=512, n_informative=16, overlap=0.7,
                     active_ratio=0.3, n_clusters=100, cluster_bits=10)
ds, _ = make_synthetic(spec, seed=3)
ds = ds.with_fold(assign_folds(leader_cluster(ds, 0.4, seed=3), seed=3))
split = make_split(ds, test_fold=0, val_fold=1)

hp = MlpHyperparams(hidden_size=64, dropout_rate=0.2, learning_rate=1e-3,
                    weight_decay=1e-4, max_epochs=40, patience=6,
                    batch_size=128, seed=11)
model, trace = train(ds, split, hp)
print(f"stopped after epoch {trace.stopped_epoch}; "
      f"best validation BCE {min(trace.val_bce):.4f} at epoch {trace.best_epoch}")

# A short view of the two loss curves:
print("\nepoch  train_bce  val_bce")
for e, (tr, va) in enumerate(zip(trace.train_bce, trace.val_bce), start=1):
    if e <= 5 or e == trace.best_epoch:
        marker = "  <- best" if e == trace.best_epoch else ""
        print(f"{e:5d}  {tr:9.4f}  {va:7.4f}{marker}")

# ---------------------------------------------------------------------------
# Every metric consumes a PredictionSet: probabilities, logits, labels.
# ---------------------------------------------------------------------------
preds = model.predict(ds, split.test)
ece, binned = calibration_error(preds, "equal-width", 10)
ace, _ = calibration_error(preds, "equal-count", 10)
print(f"\ntest metrics: AUC={auc(preds):.4f}  ACC={accuracy(preds):.4f}  "
      f"BCE={bce_loss(preds):.4f}  BS={brier(preds):.4f}")
print(f"calibration:  ECE={ece:.4f}  ACE={ace:.4f}")

rel, res, unc = brier_decomposition(preds, 10)
print(f"Brier decomposition: reliability={rel:.4f}  resolution={res:.4f}  "
      f"uncertainty={unc:.4f}")

# Reliability diagram data (what the `evaluate` command writes as CSV):
print("\nbin        conf    acc    count")
for lo, hi, conf, acc_, c in zip(binned.lower, binned.upper, binned.confidence,
                                 binned.accuracy, binned.counts):
    if c:
        print(f"[{lo:.1f},{hi:.1f})  {conf:5.3f}  {acc_:.3f}  {c:5d}")
