"""Baseline two-layer network on sparse binary inputs.

Architecture: logit = w2 . dropout(relu(W1 x + b1)) + b2, probability via the
logistic function. Training uses Adam-style adaptive updates with decoupled
weight decay, mini-batch shuffling, inverted dropout, and early stopping on
validation cross entropy. The input side never densifies: W1 x is a sum of
W1 columns at the set bits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict, replace

import numpy as np

from .data import LabeledDataset, PredictionSet, Split, SparseBinaryVector, sigmoid

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

CHECKPOINT_VERSION = 1


class TrainingDiverged(RuntimeError):
    """Training produced a non-finite loss or non-finite weights."""


@dataclass(frozen=True)
class MlpHyperparams:
    hidden_size: int
    dropout_rate: float = 0.0
    learning_rate: float = 1e-3
    weight_decay: float = 0.0
    max_epochs: int = 200
    patience: int = 10
    batch_size: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.hidden_size <= 0:
            raise ValueError("hidden_size must be positive")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")
        if self.max_epochs <= 0 or self.patience <= 0 or self.batch_size <= 0:
            raise ValueError("max_epochs, patience, and batch_size must be positive")


@dataclass
class MlpGradients:
    """Gradient with the same shapes as the model parameters."""

    W1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float


@dataclass
class TrainingTrace:
    train_bce: list
    val_bce: list
    best_epoch: int
    stopped_epoch: int


class MlpModel:
    """Immutable-after-training container for the network weights."""

    def __init__(self, W1, b1, w2, b2, hp: MlpHyperparams):
        self.W1 = np.asarray(W1, dtype=np.float64)
        self.b1 = np.asarray(b1, dtype=np.float64)
        self.w2 = np.asarray(w2, dtype=np.float64)
        self.b2 = float(b2)
        self.hp = hp
        h, _ = self.W1.shape
        if self.b1.shape != (h,) or self.w2.shape != (h,):
            raise ValueError("weight shapes are inconsistent")
        if not (np.all(np.isfinite(self.W1)) and np.all(np.isfinite(self.b1))
                and np.all(np.isfinite(self.w2)) and np.isfinite(self.b2)):
            raise ValueError("weights must be finite")

    @property
    def hidden_size(self) -> int:
        return self.W1.shape[0]

    @property
    def dim(self) -> int:
        return self.W1.shape[1]

    def copy(self) -> "MlpModel":
        return MlpModel(self.W1.copy(), self.b1.copy(), self.w2.copy(), self.b2, self.hp)

    # -- single-sample operations ------------------------------------------

    def hidden_activations(self, x: SparseBinaryVector) -> np.ndarray:
        """relu(W1 x + b1) with no dropout."""
        if x.dim != self.dim:
            raise ValueError(f"input dim {x.dim} does not match model dim {self.dim}")
        z = self.b1 + self.W1[:, x.indices].sum(axis=1)
        return np.maximum(z, 0.0)

    def forward_logit(self, x: SparseBinaryVector, dropout_mask=None) -> float:
        """Logit for one sample; a mask enables the stochastic (MC) pass.

        Kept units are scaled by 1/(1 - dropout_rate) (inverted dropout), so
        the deterministic pass needs no correction.
        """
        h = self.hidden_activations(x)
        if dropout_mask is not None:
            mask = np.asarray(dropout_mask, dtype=bool)
            if mask.shape != (self.hidden_size,):
                raise ValueError("dropout mask shape mismatch")
            h = h * mask / (1.0 - self.hp.dropout_rate)
        return float(self.w2 @ h + self.b2)

    # -- batched operations -------------------------------------------------

    def batch_hidden(self, X) -> np.ndarray:
        """relu(X W1^T + b1) for a CSR row block."""
        z = np.asarray(X @ self.W1.T) + self.b1
        return np.maximum(z, 0.0)

    def batch_logits(self, X, masks=None) -> np.ndarray:
        h = self.batch_hidden(X)
        if masks is not None:
            h = h * masks / (1.0 - self.hp.dropout_rate)
        return h @ self.w2 + self.b2

    def predict(self, ds: LabeledDataset, idx=None) -> PredictionSet:
        """Deterministic predictions for a dataset subset (all rows if idx is None)."""
        if ds.dim != self.dim:
            raise ValueError("dataset dim does not match model")
        if idx is None:
            idx = np.arange(ds.n)
        idx = np.asarray(idx, dtype=np.int64)
        z = self.batch_logits(ds.feature_matrix()[idx])
        return PredictionSet.from_logits(z, ds.labels[idx])

    # -- persistence ----------------------------------------------------------

    def save(self, path) -> None:
        """Self-describing checkpoint: shapes, hyperparameters, weights."""
        np.savez(
            path,
            format_version=np.int64(CHECKPOINT_VERSION),
            hp_json=np.bytes_(json.dumps(asdict(self.hp)).encode("utf-8")),
            W1=self.W1, b1=self.b1, w2=self.w2, b2=np.float64(self.b2),
        )

    @classmethod
    def load(cls, path) -> "MlpModel":
        with np.load(path, allow_pickle=False) as ck:
            version = int(ck["format_version"])
            if version != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {version}")
            hp = MlpHyperparams(**json.loads(bytes(ck["hp_json"]).decode("utf-8")))
            return cls(ck["W1"], ck["b1"], ck["w2"], float(ck["b2"]), hp)


def _bce_with_logits(z: np.ndarray, y: np.ndarray) -> float:
    # log(1 + e^z) - y*z, written to avoid overflow on both tails
    return float(np.mean(np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))))


def _backward(model: MlpModel, X, y, masks):
    """Mean-BCE gradient for one batch with dropout masks held fixed."""
    B = X.shape[0]
    raw = np.asarray(X @ model.W1.T) + model.b1
    h = np.maximum(raw, 0.0)
    if masks is not None:
        scale = 1.0 / (1.0 - model.hp.dropout_rate)
        hd = h * masks * scale
    else:
        hd = h
    z = hd @ model.w2 + model.b2
    g = (sigmoid(z) - y) / B

    gw2 = hd.T @ g
    gb2 = float(g.sum())
    dhd = np.outer(g, model.w2)
    if masks is not None:
        dhd = dhd * masks * scale
    dz = dhd * (raw > 0.0)
    gW1 = np.asarray((X.T @ dz).T)
    gb1 = dz.sum(axis=0)
    return MlpGradients(gW1, gb1, gw2, gb2), z


def bce_gradient(model: MlpModel, ds: LabeledDataset, batch_idx, masks=None) -> MlpGradients:
    """Exact gradient of the mean batch BCE plus weight_decay * weights.

    The decay term applies to W1 and w2 only (biases excluded). `masks`, when
    given, is a (batch, hidden) boolean array of kept units.
    """
    batch_idx = np.asarray(batch_idx, dtype=np.int64)
    if batch_idx.size == 0:
        raise ValueError("batch must be non-empty")
    X = ds.feature_matrix()[batch_idx]
    y = ds.labels[batch_idx].astype(np.float64)
    grads, _ = _backward(model, X, y, masks)
    wd = model.hp.weight_decay
    if wd > 0.0:
        grads.W1 = grads.W1 + wd * model.W1
        grads.w2 = grads.w2 + wd * model.w2
    return grads


def _init_model(hp: MlpHyperparams, dim: int, rng: np.random.Generator) -> MlpModel:
    # Uniform He-style fan-in scaling; biases start at zero.
    lim1 = np.sqrt(6.0 / dim)
    lim2 = np.sqrt(6.0 / hp.hidden_size)
    W1 = rng.uniform(-lim1, lim1, size=(hp.hidden_size, dim))
    w2 = rng.uniform(-lim2, lim2, size=hp.hidden_size)
    return MlpModel(W1, np.zeros(hp.hidden_size), w2, 0.0, hp)


def train(ds: LabeledDataset, split: Split, hp: MlpHyperparams):
    """Train a model; returns (best model by validation BCE, TrainingTrace).

    Mini-batches are reshuffled per epoch; validation BCE is evaluated after
    each epoch with dropout off; training stops once it has not improved for
    `patience` epochs or at `max_epochs`. Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(hp.seed)
    model = _init_model(hp, ds.dim, rng)
    X = ds.feature_matrix()
    y_all = ds.labels.astype(np.float64)
    train_idx = np.asarray(split.train, dtype=np.int64)
    val_idx = np.asarray(split.validation, dtype=np.int64)
    X_val = X[val_idx]
    y_val = y_all[val_idx]

    mw = MlpGradients(np.zeros_like(model.W1), np.zeros_like(model.b1),
                      np.zeros_like(model.w2), 0.0)
    vw = MlpGradients(np.zeros_like(model.W1), np.zeros_like(model.b1),
                      np.zeros_like(model.w2), 0.0)
    step = 0
    lr, wd, p = hp.learning_rate, hp.weight_decay, hp.dropout_rate

    best_val = np.inf
    best_weights = None
    best_epoch = 0
    epochs_since_best = 0
    train_curve, val_curve = [], []

    for epoch in range(1, hp.max_epochs + 1):
        perm = train_idx[rng.permutation(train_idx.size)]
        batch_losses = []
        for start in range(0, perm.size, hp.batch_size):
            batch = perm[start:start + hp.batch_size]
            Xb = X[batch]
            yb = y_all[batch]
            masks = rng.random((batch.size, hp.hidden_size)) >= p if p > 0.0 else None
            grads, z = _backward(model, Xb, yb, masks)
            loss = _bce_with_logits(z, yb)
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite training loss at epoch {epoch}")
            batch_losses.append(loss)

            step += 1
            c1 = 1.0 - ADAM_BETA1 ** step
            c2 = 1.0 - ADAM_BETA2 ** step
            for name in ("W1", "b1", "w2", "b2"):
                g = getattr(grads, name)
                m = ADAM_BETA1 * getattr(mw, name) + (1.0 - ADAM_BETA1) * g
                v = ADAM_BETA2 * getattr(vw, name) + (1.0 - ADAM_BETA2) * (g * g)
                setattr(mw, name, m)
                setattr(vw, name, v)
                update = lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)
                setattr(model, name, getattr(model, name) - update)
            model.b2 = float(model.b2)
            if wd > 0.0:
                # decoupled decay: applied to the weights directly, not
                # through the Adam moments; biases excluded
                model.W1 -= lr * wd * model.W1
                model.w2 -= lr * wd * model.w2

        val_z = model.batch_logits(X_val)
        val_loss = _bce_with_logits(val_z, y_val)
        if not np.isfinite(val_loss):
            raise TrainingDiverged(f"non-finite validation loss at epoch {epoch}")
        train_curve.append(float(np.mean(batch_losses)))
        val_curve.append(val_loss)

        if val_loss < best_val:
            best_val = val_loss
            best_weights = (model.W1.copy(), model.b1.copy(), model.w2.copy(), model.b2)
            best_epoch = epoch
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= hp.patience:
                break

    W1, b1, w2, b2 = best_weights
    best_model = MlpModel(W1, b1, w2, b2, hp)
    return best_model, TrainingTrace(train_curve, val_curve, best_epoch, len(val_curve))


def with_seed(hp: MlpHyperparams, seed: int) -> MlpHyperparams:
    return replace(hp, seed=seed)
