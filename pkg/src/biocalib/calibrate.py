"""Probability calibration and uncertainty quantification on trained models.

Platt scaling (post hoc logistic recalibration of logits, fit on held-out
data), Monte Carlo dropout (averaged stochastic forward passes), and deep
ensembles (averaged independently initialized models). Averaging happens in
probability space; stored logits are the transformed mean so every output
remains a consistent PredictionSet.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset, PredictionSet, Split, sigmoid
from .mlp import MlpHyperparams, MlpModel, train, with_seed
from .seeding import derive_seed

PLATT_RIDGE = 1e-6
PLATT_TOL = 1e-8
PLATT_MAX_ITER = 100

DEFAULT_ENSEMBLE_SIZE = 50
DEFAULT_MC_PASSES = 100


@dataclass(frozen=True)
class PlattParams:
    """Affine recalibration of logits: new_logit = a * logit + b."""

    a: float
    b: float
    converged: bool = True
    n_iter: int = 0


def platt_fit(calib: PredictionSet, ridge: float = PLATT_RIDGE) -> PlattParams:
    """Fit (a, b) by maximizing the Bernoulli likelihood of sigmoid(a*logit + b).

    Newton iterations with an L2 ridge on (a, b); converged when the gradient
    norm drops below 1e-8 or after 100 iterations (then the last iterate is
    returned with converged=False and a warning). The calibration data should
    come from the validation split, never from training or test data.
    """
    y = calib.labels.astype(np.float64)
    if y.min() == y.max():
        raise ValueError("Platt fit needs both classes in the calibration set")
    l = calib.logits
    a, b = 1.0, 0.0

    def objective(a_, b_):
        z = a_ * l + b_
        nll = np.sum(np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z))))
        return nll + 0.5 * ridge * (a_ * a_ + b_ * b_)

    converged = False
    it = 0
    for it in range(1, PLATT_MAX_ITER + 1):
        z = a * l + b
        s = sigmoid(z)
        r = s - y
        ga = float(r @ l) + ridge * a
        gb = float(r.sum()) + ridge * b
        if np.hypot(ga, gb) < PLATT_TOL:
            converged = True
            break
        w = s * (1.0 - s)
        haa = float(w @ (l * l)) + ridge
        hab = float(w @ l)
        hbb = float(w.sum()) + ridge
        det = haa * hbb - hab * hab
        da = -(hbb * ga - hab * gb) / det
        db = -(haa * gb - hab * ga) / det
        # halve the Newton step until the penalized likelihood improves
        f0 = objective(a, b)
        t = 1.0
        while t > 1e-12 and objective(a + t * da, b + t * db) > f0:
            t *= 0.5
        a += t * da
        b += t * db

    if not converged:
        z = a * l + b
        s = sigmoid(z)
        r = s - y
        if np.hypot(float(r @ l) + ridge * a, float(r.sum()) + ridge * b) < PLATT_TOL:
            converged = True
    if not converged:
        warnings.warn("Platt fit did not converge; returning last iterate", RuntimeWarning)
    if a <= 0.0:
        warnings.warn("Platt slope is not positive; calibration set appears "
                      "anti-correlated with the labels", RuntimeWarning)
    return PlattParams(float(a), float(b), converged, it)


def platt_apply(params: PlattParams, preds: PredictionSet) -> PredictionSet:
    """Apply the affine logit map; a > 0 preserves the prediction ranking."""
    new_logits = params.a * preds.logits + params.b
    return PredictionSet.from_logits(new_logits, preds.labels)


def mc_dropout_predict(model: MlpModel, ds: LabeledDataset, idx, n_passes: int = DEFAULT_MC_PASSES,
                       seed: int = 0) -> PredictionSet:
    """Average `n_passes` stochastic forward passes with dropout active.

    A fresh mask is drawn per pass and per sample. With dropout_rate 0 the
    masks keep every unit, so the result equals the deterministic prediction
    and the passes are skipped.
    """
    if n_passes < 1:
        raise ValueError("n_passes must be >= 1")
    idx = np.asarray(idx, dtype=np.int64)
    p = model.hp.dropout_rate
    if p == 0.0:
        return model.predict(ds, idx)
    rng = np.random.default_rng(seed)
    X = ds.feature_matrix()[idx]
    h = model.batch_hidden(X)
    scale = 1.0 / (1.0 - p)
    acc = np.zeros(idx.size, dtype=np.float64)
    for _ in range(n_passes):
        masks = rng.random(h.shape) >= p
        z = (h * masks * scale) @ model.w2 + model.b2
        acc += sigmoid(z)
    return PredictionSet.from_probs(acc / n_passes, ds.labels[idx])


@dataclass
class Ensemble:
    """M >= 2 models sharing hyperparameters but trained from distinct seeds."""

    members: list

    def __post_init__(self):
        if len(self.members) < 2:
            raise ValueError("an ensemble needs at least 2 members")
        first = self.members[0]
        for m in self.members[1:]:
            if m.W1.shape != first.W1.shape:
                raise ValueError("ensemble members must share shapes")

    @property
    def size(self) -> int:
        return len(self.members)


def ensemble_train(ds: LabeledDataset, split: Split, hp: MlpHyperparams,
                   n_members: int = DEFAULT_ENSEMBLE_SIZE, seed: int = 0) -> Ensemble:
    """Train `n_members` independent models with seeds derived from `seed`.

    Identical data and hyperparameters; only the weight initialization and
    batch shuffling differ between members.
    """
    if n_members < 2:
        raise ValueError("n_members must be >= 2")
    members = []
    for i in range(n_members):
        member_hp = with_seed(hp, derive_seed(seed, "ensemble-member", i))
        try:
            model, _ = train(ds, split, member_hp)
        except Exception as exc:
            raise RuntimeError(f"ensemble member {i} failed to train: {exc}") from exc
        members.append(model)
    return Ensemble(members)


def ensemble_predict(ensemble: Ensemble, ds: LabeledDataset, idx=None) -> PredictionSet:
    """Mean of the member probabilities; logits are the transformed mean."""
    if idx is None:
        idx = np.arange(ds.n)
    idx = np.asarray(idx, dtype=np.int64)
    acc = np.zeros(idx.size, dtype=np.float64)
    for m in ensemble.members:
        acc += m.predict(ds, idx).probs
    return PredictionSet.from_probs(acc / ensemble.size, ds.labels[idx])


def save_ensemble(ensemble: Ensemble, directory) -> None:
    """Checkpoint directory: one member file each plus a manifest."""
    os.makedirs(directory, exist_ok=True)
    names = []
    for i, m in enumerate(ensemble.members):
        name = f"member_{i:03d}.npz"
        m.save(os.path.join(directory, name))
        names.append(name)
    with open(os.path.join(directory, "ensemble.json"), "w", encoding="utf-8") as fh:
        json.dump({"format_version": 1, "members": names}, fh, indent=2)


def load_ensemble(directory) -> Ensemble:
    with open(os.path.join(directory, "ensemble.json"), "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    members = [MlpModel.load(os.path.join(directory, name)) for name in manifest["members"]]
    return Ensemble(members)
