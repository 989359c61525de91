"""Evaluation and model-selection metrics for binary probability predictions.

Includes the proper scoring rules (binary cross entropy, Brier score), the
two binned calibration errors (ECE with equal-width bins, ACE with
equal-count bins), ranking metrics (AUC, accuracy), and the Murphy
decomposition of the Brier score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import PredictionSet

# Clamp applied to probabilities before the log in the BCE only; Brier and
# the calibration errors use raw values.
BCE_CLAMP = 1e-7

DEFAULT_BINS = 10

EQUAL_WIDTH = "equal-width"
EQUAL_COUNT = "equal-count"


def _mean_exact(values: np.ndarray) -> float:
    """Mean via exactly-rounded summation.

    A bin whose entries are all identical reports that value verbatim, so a
    constant base-rate predictor scores a calibration error of exactly zero
    rather than within a few ulps of it.
    """
    v0 = values[0]
    if np.all(values == v0):
        return float(v0)
    return math.fsum(values) / values.size


@dataclass(frozen=True)
class BinnedCalibration:
    """Per-bin counts, mean confidence, and empirical accuracy.

    For the equal-width scheme all `n_bins` bins are reported (empty bins
    have count 0 and NaN confidence/accuracy); for equal-count only occupied
    bins appear. `lower`/`upper` are bin edges for equal-width and observed
    score ranges for equal-count.
    """

    scheme: str
    n_bins: int
    counts: np.ndarray
    confidence: np.ndarray
    accuracy: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def n(self) -> int:
        return int(self.counts.sum())


def _equal_width_bins(probs: np.ndarray, n_bins: int) -> np.ndarray:
    # Membership is [edge_b, edge_{b+1}) with the final bin closed at 1.0.
    edges = np.arange(n_bins + 1) / n_bins
    idx = np.searchsorted(edges, probs, side="right") - 1
    return np.minimum(idx, n_bins - 1)

def _equal_count_segments(sorted_probs: np.ndarray, n_bins: int) -> list:
    """Boundary positions for score-sorted equal-count bins.

    Ideal cut points split the sorted scores into groups whose sizes differ
    by at most one; a cut landing inside a run of tied scores is pushed to
    the end of the run so ties never split across bins.
    """
    n = sorted_probs.size
    cuts = {0, n}
    for j in range(1, n_bins):
        pos = (j * n) // n_bins
        if 0 < pos < n and sorted_probs[pos - 1] == sorted_probs[pos]:
            pos = int(np.searchsorted(sorted_probs, sorted_probs[pos], side="right"))
        if 0 < pos < n:
            cuts.add(pos)
    bounds = sorted(cuts)
    return list(zip(bounds[:-1], bounds[1:]))


def calibration_error(preds: PredictionSet, scheme: str = EQUAL_WIDTH,
                      n_bins: int = DEFAULT_BINS):
    """Binned calibration error: (1/N) * sum_b n_b * |acc(b) - conf(b)|.

    scheme "equal-width" is the ECE, "equal-count" the ACE. Returns
    (error, BinnedCalibration). Empty bins contribute zero.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    if scheme not in (EQUAL_WIDTH, EQUAL_COUNT):
        raise ValueError(f"unknown binning scheme {scheme!r}")
    probs = preds.probs
    labels = preds.labels.astype(np.float64)
    n = preds.n

    counts, confs, accs, lowers, uppers = [], [], [], [], []
    if scheme == EQUAL_WIDTH:
        edges = np.arange(n_bins + 1) / n_bins
        idx = _equal_width_bins(probs, n_bins)
        for b in range(n_bins):
            mask = idx == b
            c = int(np.count_nonzero(mask))
            counts.append(c)
            confs.append(_mean_exact(probs[mask]) if c else math.nan)
            accs.append(_mean_exact(labels[mask]) if c else math.nan)
            lowers.append(edges[b])
            uppers.append(edges[b + 1])
    else:
        order = np.argsort(probs, kind="stable")
        sp = probs[order]
        sy = labels[order]
        for lo, hi in _equal_count_segments(sp, n_bins):
            counts.append(hi - lo)
            confs.append(_mean_exact(sp[lo:hi]))
            accs.append(_mean_exact(sy[lo:hi]))
            lowers.append(sp[lo])
            uppers.append(sp[hi - 1])

    counts = np.array(counts, dtype=np.int64)
    confs = np.array(confs)
    accs = np.array(accs)
    occupied = counts > 0
    ce = math.fsum(
        c * abs(a - f) for c, a, f in zip(counts[occupied], accs[occupied], confs[occupied])
    ) / n
    binned = BinnedCalibration(scheme, n_bins, counts, confs, accs,
                               np.array(lowers), np.array(uppers))
    return ce, binned


def bce_loss(preds: PredictionSet) -> float:
    """Mean binary cross entropy; probabilities clamped to [1e-7, 1 - 1e-7]."""
    p = np.clip(preds.probs, BCE_CLAMP, 1.0 - BCE_CLAMP)
    y = preds.labels
    return float(np.mean(-(y * np.log(p) + (1 - y) * np.log1p(-p))))


def brier(preds: PredictionSet) -> float:
    """Mean squared error between predicted probabilities and labels."""
    d = preds.probs - preds.labels
    return float(np.mean(d * d))


def auc(preds: PredictionSet) -> float:
    """Area under the ROC curve via rank sums; ties count one half.

    Equals the fraction of (positive, negative) pairs ranked correctly.
    Ranking uses the logit representation: it orders identically to the
    probabilities (the logistic map is monotone) but does not saturate, so
    an affine recalibration of the logits provably cannot change the value.
    Raises on single-class inputs.
    """
    y = preds.labels
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC requires both classes present")
    ranks = _average_ranks(preds.logits)
    rank_sum = float(ranks[y == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="stable")
    sx = x[order]
    ranks = np.empty(x.size, dtype=np.float64)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def accuracy(preds: PredictionSet, threshold: float = 0.5) -> float:
    """Fraction of samples with (prob >= threshold) equal to the label."""
    pred_pos = (preds.probs >= threshold).astype(np.int64)
    return float(np.mean(pred_pos == preds.labels))


def brier_decomposition(preds: PredictionSet, n_bins: int = DEFAULT_BINS):
    """Murphy decomposition (reliability, resolution, uncertainty).

    Uses equal-width bins with each forecast replaced by its bin's mean
    confidence; reliability - resolution + uncertainty equals the Brier
    score of those discretized forecasts.
    """
    probs = preds.probs
    y = preds.labels.astype(np.float64)
    n = preds.n
    idx = _equal_width_bins(probs, n_bins)
    base = _mean_exact(y)
    rel_terms, res_terms = [], []
    for b in range(n_bins):
        mask = idx == b
        c = int(np.count_nonzero(mask))
        if c == 0:
            continue
        conf = _mean_exact(probs[mask])
        acc = _mean_exact(y[mask])
        rel_terms.append(c * (conf - acc) ** 2)
        res_terms.append(c * (acc - base) ** 2)
    reliability = math.fsum(rel_terms) / n
    resolution = math.fsum(res_terms) / n
    uncertainty = base * (1.0 - base)
    return reliability, resolution, uncertainty


def reliability_rows(binned: BinnedCalibration) -> list:
    """Plot-ready rows (bin_lo, bin_hi, confidence, accuracy, count)."""
    rows = []
    for lo, hi, conf, acc, c in zip(binned.lower, binned.upper, binned.confidence,
                                    binned.accuracy, binned.counts):
        rows.append((float(lo), float(hi), float(conf), float(acc), int(c)))
    return rows
