"""Bayesian linear probing step by step: leapfrog, HMC, prior selection.

The trained network is frozen; a Bayesian logistic regression over its
hidden activations is sampled with Hamiltonian Monte Carlo, and test
predictions average the per-draw probabilities. The Gaussian prior's
precision plays the role of a regularization strength and is tuned on the
validation fold.

Run:  python demos/04_bayesian_linear_probing.py
"""

import numpy as np

from biocalib import (
    BlpConfig,
    MlpHyperparams,
    SyntheticSpec,
    assign_folds,
    auc,
    blp_predict,
    calibration_error,
    hmc_sample,
    leader_cluster,
    leapfrog,
    make_split,
    make_synthetic,
    select_prior_precision,
    train,
)
from biocalib.blp import hidden_design

# ---------------------------------------------------------------------------
# 1. The integrator on a potential we understand: U(q) = q^2 / 2.
# ---------------------------------------------------------------------------
def harmonic(q):
    return 0.5 * float(q @ q), q.copy()

q, p = leapfrog(harmonic, np.array([1.0]), np.array([0.0]), epsilon=0.1, n_steps=1)
print(f"one leapfrog step from (q=1, p=0): q={q[0]:.6f}, p={p[0]:.6f}")

q2, p2 = leapfrog(harmonic, q, -p, epsilon=0.1, n_steps=1)
print(f"reversed: back to q={q2[0]:.6f} (round-trip error "
      f"{abs(q2[0] - 1.0):.2e})\n")

# ---------------------------------------------------------------------------
# 2. HMC on a 2-D standard normal: the sample moments match the target.
# ---------------------------------------------------------------------------
samples = hmc_sample(harmonic, np.zeros(2), n_samples=4000, burn_in=100,
                     epsilon=0.2, n_leapfrog=12, seed=0)
print(f"HMC on N(0, I): accept rate {samples.accept_rate:.2f}")
print(f"sample mean {np.round(samples.samples.mean(axis=0), 3)}")
print(f"sample cov  {np.round(np.cov(samples.samples.T), 3).tolist()}\n")

# ---------------------------------------------------------------------------
# 3. Linear probing on a trained network.
# ---------------------------------------------------------------------------
spec = SyntheticSpec(n=3000, dim=512, n_informative=16, overlap=0.8,
                     active_ratio=0.25, n_clusters=100, cluster_bits=10)
ds, _ = make_synthetic(spec, seed=9)
ds = ds.with_fold(assign_folds(leader_cluster(ds, 0.4, seed=9), seed=9))
split = make_split(ds, test_fold=0, val_fold=1)

hp = MlpHyperparams(hidden_size=128, dropout_rate=0.0, learning_rate=2e-2,
                    weight_decay=0.0, max_epochs=12, patience=12,
                    batch_size=64, seed=4)
model, _ = train(ds, split, hp)
baseline = model.predict(ds, split.test)

cfg = BlpConfig(n_samples=200, burn_in=50, n_leapfrog=15,
                tau_grid=(10.0, 100.0, 1000.0))
selection = select_prior_precision(model, ds, split, cfg.tau_grid, cfg, seed=6)
print("prior precision selection (validation BCE per tau):")
for tau, score in selection.table:
    marker = "  <- selected" if tau == selection.tau else ""
    print(f"  tau={tau:<8g} bce={score:.4f}{marker}")

posterior = selection.best_samples
print(f"\nchain diagnostics: accept rate {posterior.accept_rate:.2f}, "
      f"epsilon {posterior.epsilon:.4g}, {posterior.n_leapfrog} leapfrog steps")

hidden = hidden_design(model, ds, split.test)
probed = blp_predict(posterior, hidden, ds.labels[split.test])

for name, preds in (("MLP", baseline), ("MLP-BLP", probed)):
    ece, _ = calibration_error(preds, "equal-width", 10)
    print(f"{name:8s} ECE={ece:.4f}  AUC={auc(preds):.4f}")
