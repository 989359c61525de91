"""Bayesian linear probing: HMC over last-layer logistic-regression weights.

The trained network is frozen; its hidden activations (plus an intercept
column) become the design matrix of a Bayesian logistic regression with a
Gaussian prior of precision tau. A Hamiltonian Monte Carlo sampler draws
weight vectors from the posterior, and test predictions average the
per-sample logistic probabilities over those draws.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset, PredictionSet, Split, sigmoid
from .mlp import MlpModel
from .seeding import derive_seed


class DivergenceError(RuntimeError):
    """A leapfrog trajectory produced a non-finite state."""


@dataclass(frozen=True)
class BlpTarget:
    """Design matrix (activations + intercept), labels, and prior precision."""

    features: np.ndarray
    labels: np.ndarray
    tau: float

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.float64))
        if self.tau <= 0:
            raise ValueError("prior precision tau must be positive")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features must be finite")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features/labels length mismatch")

    @property
    def n_weights(self) -> int:
        return self.features.shape[1]


def neg_log_posterior(target: BlpTarget, w: np.ndarray):
    """Unnormalized negative log posterior and its exact gradient.

    Value is the summed (not averaged) cross entropy plus (tau/2) ||w||^2;
    the intercept weight is included under the prior.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (target.n_weights,):
        raise ValueError("weight shape mismatch")
    z = target.features @ w
    y = target.labels
    nll = float(np.sum(np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))))
    value = nll + 0.5 * target.tau * float(w @ w)
    grad = target.features.T @ (sigmoid(z) - y) + target.tau * w
    return value, grad


def make_potential(target: BlpTarget):
    """Adapt a BlpTarget to the (value, grad) callable the sampler expects."""
    return lambda w: neg_log_posterior(target, w)


def leapfrog(potential, q0, p0, epsilon: float, n_steps: int):
    """Half-kick / drift / half-kick integration with identity mass matrix.

    `potential` maps position -> (value, gradient). Deterministic; raises
    DivergenceError if the state leaves the finite range.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    q = np.array(q0, dtype=np.float64)
    p = np.array(p0, dtype=np.float64)
    _, g = potential(q)
    p = p - 0.5 * epsilon * g
    for step in range(n_steps):
        q = q + epsilon * p
        if not np.all(np.isfinite(q)):
            raise DivergenceError("leapfrog position diverged")
        _, g = potential(q)
        if not np.all(np.isfinite(g)):
            raise DivergenceError("leapfrog gradient diverged")
        if step < n_steps - 1:
            p = p - epsilon * g
    p = p - 0.5 * epsilon * g
    if not np.all(np.isfinite(p)):
        raise DivergenceError("leapfrog momentum diverged")
    return q, p


@dataclass
class PosteriorSamples:
    """Retained HMC draws plus sampler diagnostics."""

    samples: np.ndarray
    accept_rate: float
    burn_in: int
    epsilon: float
    n_leapfrog: int
    seed: int = 0

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        if self.samples.shape[0] < 1:
            raise ValueError("need at least one retained sample")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")
        if not (0.0 <= self.accept_rate <= 1.0):
            raise ValueError("accept_rate must lie in [0, 1]")
        if self.epsilon <= 0 or self.n_leapfrog < 1:
            raise ValueError("invalid sampler settings")


def hmc_sample(potential, init, n_samples: int, burn_in: int, epsilon: float,
               n_leapfrog: int, seed: int = 0) -> PosteriorSamples:
    """Hamiltonian Monte Carlo with a Metropolis-Hastings correction.

    Momenta are standard normal; a proposal is accepted with probability
    min(1, exp(-dH)), a rejected or divergent proposal repeats the current
    state. The first `burn_in` iterations are discarded. Deterministic for a
    fixed seed. The reported accept rate covers the retained phase; below
    0.1 it triggers a warning, not a failure.
    """
    if n_samples < 1 or burn_in < 0:
        raise ValueError("need n_samples >= 1 and burn_in >= 0")
    rng = np.random.default_rng(seed)
    q = np.array(init, dtype=np.float64)
    u_val, _ = potential(q)
    retained = np.empty((n_samples, q.size), dtype=np.float64)
    accepted_retained = 0
    for it in range(burn_in + n_samples):
        p0 = rng.standard_normal(q.size)
        log_u = math.log1p(-rng.random())  # log of a (0, 1] uniform
        accepted = False
        try:
            q_new, p_new = leapfrog(potential, q, p0, epsilon, n_leapfrog)
            u_new, _ = potential(q_new)
            h0 = u_val + 0.5 * float(p0 @ p0)
            h1 = u_new + 0.5 * float(p_new @ p_new)
            # log_u <= 0, so a proposal with dH <= 0 is always accepted
            if np.isfinite(h1) and log_u <= -(h1 - h0):
                q, u_val = q_new, u_new
                accepted = True
        except DivergenceError:
            pass
        if it >= burn_in:
            retained[it - burn_in] = q
            accepted_retained += accepted
    rate = accepted_retained / n_samples
    if rate < 0.1:
        warnings.warn(f"HMC accept rate {rate:.3f} below 0.1; samples are "
                      "likely unreliable", RuntimeWarning)
    return PosteriorSamples(retained, rate, burn_in, epsilon, n_leapfrog, seed)


def auto_epsilon(potential, init, n_leapfrog: int, seed: int = 0, start: float = 0.1,
                 accept_low: float = 0.6, accept_high: float = 0.95,
                 pilot_iters: int = 30, max_halvings: int = 15) -> float:
    """Halve the step size from `start` until a pilot chain accepts enough.

    Targets an accept rate in [accept_low, accept_high]; rates above the band
    are tolerated (they only slow mixing), rates below trigger another
    halving.
    """
    eps = start
    for attempt in range(max_halvings + 1):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            pilot = hmc_sample(potential, init, pilot_iters, 0, eps, n_leapfrog,
                               derive_seed(seed, "pilot", attempt))
        if pilot.accept_rate >= accept_low:
            return eps
        eps *= 0.5
    return eps


def map_estimate(target: BlpTarget, max_iter: int = 250, tol: float = 1e-6) -> np.ndarray:
    """Posterior mode via gradient descent with backtracking line search.

    Used to initialize the chain, which shortens the burn-in needed.
    """
    w = np.zeros(target.n_weights)
    value, grad = neg_log_posterior(target, w)
    step = 1.0 / max(1.0, float(np.linalg.norm(target.features, ord="fro")))
    for _ in range(max_iter):
        gnorm = float(np.linalg.norm(grad))
        if gnorm < tol:
            break
        t = step
        while t > 1e-16:
            w_new = w - t * grad
            value_new, grad_new = neg_log_posterior(target, w_new)
            if value_new <= value - 1e-4 * t * gnorm * gnorm:
                break
            t *= 0.5
        if t <= 1e-16:
            break
        w, value, grad = w_new, value_new, grad_new
        step = min(t * 2.0, 1.0)
    return w


@dataclass(frozen=True)
class BlpConfig:
    """Sampler budget and prior grid for linear probing."""

    n_samples: int = 300
    burn_in: int = 100
    n_leapfrog: int = 50
    epsilon: float | None = None  # None = auto-scale by halving from 0.1
    tau_grid: tuple = (0.01, 0.1, 1.0, 10.0, 100.0)


def hidden_design(model: MlpModel, ds: LabeledDataset, idx) -> np.ndarray:
    """Hidden activations for a dataset subset, deterministic pass, no intercept."""
    idx = np.asarray(idx, dtype=np.int64)
    return model.batch_hidden(ds.feature_matrix()[idx])


def _with_intercept(hidden: np.ndarray) -> np.ndarray:
    return np.hstack([hidden, np.ones((hidden.shape[0], 1))])


def fit_blp(model: MlpModel, ds: LabeledDataset, train_idx, tau: float,
            config: BlpConfig, seed: int = 0) -> PosteriorSamples:
    """Sample last-layer weights on the frozen train activations."""
    features = _with_intercept(hidden_design(model, ds, train_idx))
    target = BlpTarget(features, ds.labels[np.asarray(train_idx, dtype=np.int64)], tau)
    potential = make_potential(target)
    w0 = map_estimate(target)
    eps = config.epsilon
    if eps is None:
        eps = auto_epsilon(potential, w0, config.n_leapfrog, derive_seed(seed, "eps"))
    return hmc_sample(potential, w0, config.n_samples, config.burn_in, eps,
                      config.n_leapfrog, derive_seed(seed, "chain"))


def blp_predict(samples: PosteriorSamples, hidden: np.ndarray, labels) -> PredictionSet:
    """Posterior predictive: mean of sigmoid(w . [h; 1]) over the draws."""
    F = _with_intercept(np.asarray(hidden, dtype=np.float64))
    if F.shape[1] != samples.samples.shape[1]:
        raise ValueError("feature width does not match posterior samples")
    probs = sigmoid(F @ samples.samples.T).mean(axis=1)
    return PredictionSet.from_probs(probs, labels)


@dataclass
class TauSelection:
    tau: float
    table: list            # (tau, validation BCE or None) per grid point
    failures: list         # (tau, error message)
    best_samples: PosteriorSamples | None = None


def select_prior_precision(model: MlpModel, ds: LabeledDataset, split: Split,
                           tau_grid, config: BlpConfig, seed: int = 0) -> TauSelection:
    """Pick the prior precision minimizing validation BCE of the BLP predictive.

    Larger tau regularizes harder, so this single scalar plays the role the
    weight decay plays for the network. Each grid point runs its own chain;
    per-point sampler failures are recorded and skipped, and the best
    surviving point is returned as long as at least one succeeds.
    """
    tau_grid = list(tau_grid)
    if not tau_grid:
        raise ValueError("tau grid must be non-empty")
    from .metrics import bce_loss

    val_hidden = hidden_design(model, ds, split.validation)
    val_labels = ds.labels[split.validation]
    table, failures = [], []
    best = None
    for tau in tau_grid:
        try:
            samples = fit_blp(model, ds, split.train, tau, config,
                              derive_seed(seed, "tau", float(tau)))
            preds = blp_predict(samples, val_hidden, val_labels)
            score = bce_loss(preds)
            table.append((tau, score))
            if best is None or score < best[1]:
                best = (tau, score, samples)
        except (DivergenceError, RuntimeError, ValueError) as exc:
            failures.append((tau, str(exc)))
            table.append((tau, None))
    if best is None:
        raise RuntimeError(f"all tau grid points failed: {failures}")
    return TauSelection(best[0], table, failures, best[2])


def save_posterior(samples: PosteriorSamples, path) -> None:
    """Matrix file: `# key=value` diagnostics header, then one draw per row."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# accept_rate={samples.accept_rate:.17g}\n")
        fh.write(f"# burn_in={samples.burn_in}\n")
        fh.write(f"# epsilon={samples.epsilon:.17g}\n")
        fh.write(f"# n_leapfrog={samples.n_leapfrog}\n")
        fh.write(f"# seed={samples.seed}\n")
        for row in samples.samples:
            fh.write(" ".join(format(v, ".17g") for v in row) + "\n")


def load_posterior(path) -> PosteriorSamples:
    meta = {}
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = value.strip()
            else:
                rows.append([float(t) for t in line.split()])
    return PosteriorSamples(
        np.array(rows, dtype=np.float64),
        accept_rate=float(meta["accept_rate"]),
        burn_in=int(meta["burn_in"]),
        epsilon=float(meta["epsilon"]),
        n_leapfrog=int(meta["n_leapfrog"]),
        seed=int(meta.get("seed", 0)),
    )
