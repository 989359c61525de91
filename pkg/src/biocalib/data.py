"""Core data containers: sparse binary features, labeled datasets, predictions.

On-disk formats are plain UTF-8 text so that other tools (including the
fingerprint ingestion pipeline) can produce and consume them without this
package. See `load_sparse_dataset` / `save_sparse_dataset` for the feature
file and `save_predictions` / `load_predictions` for the prediction CSV.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse as sp

# Probabilities are clamped into [PROB_EPS, 1 - PROB_EPS] before taking a
# logit, keeping logits finite while staying far below the documented
# sigmoid/logit consistency tolerance of 1e-9.
PROB_EPS = 1e-12
CONSISTENCY_TOL = 1e-9

N_FOLDS = 5


class SparseFormatError(ValueError):
    """A sparse feature file or prediction CSV violates the expected format."""


def sigmoid(x):
    """Numerically stable logistic function; scalar in, scalar out."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ex = np.exp(arr[~pos])
    out[~pos] = ex / (1.0 + ex)
    return float(out[0]) if np.ndim(x) == 0 else out


def logit(p):
    """Inverse logistic function; inputs must lie strictly inside (0, 1)."""
    arr = np.atleast_1d(np.asarray(p, dtype=float))
    out = np.log(arr) - np.log1p(-arr)
    return float(out[0]) if np.ndim(p) == 0 else out


@dataclass(frozen=True, eq=False)
class SparseBinaryVector:
    """One compound's fingerprint: set-bit indices over a fixed feature space."""

    dim: int
    indices: np.ndarray

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError(f"dim must be positive, got {self.dim}")
        idx = np.asarray(self.indices, dtype=np.int64)
        object.__setattr__(self, "indices", idx)
        if idx.size:
            if idx[0] < 0 or idx[-1] >= self.dim:
                raise ValueError("bit index out of range [0, dim)")
            if np.any(np.diff(idx) <= 0):
                raise ValueError("bit indices must be strictly increasing")

    def __len__(self) -> int:
        return int(self.indices.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseBinaryVector):
            return NotImplemented
        return self.dim == other.dim and np.array_equal(self.indices, other.indices)


@dataclass(eq=False)
class LabeledDataset:
    """Parallel lists of fingerprints, binary labels, and compound ids.

    Datasets are immutable after construction; fold assignment produces a new
    instance (`with_fold`). Splits reference samples by index.
    """

    vectors: list
    labels: np.ndarray
    ids: list
    fold: np.ndarray | None = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.ids = list(self.ids)
        n = len(self.vectors)
        if not (len(self.labels) == n and len(self.ids) == n):
            raise ValueError("vectors, labels, and ids must have equal length")
        if n == 0:
            raise ValueError("dataset must contain at least one sample")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise ValueError("labels must be 0 or 1")
        dims = {v.dim for v in self.vectors}
        if len(dims) != 1:
            raise ValueError("all vectors must share one feature dimension")
        if len(set(self.ids)) != n:
            raise ValueError("compound ids must be unique")
        if self.fold is not None:
            self.fold = np.asarray(self.fold, dtype=np.int64)
            if len(self.fold) != n:
                raise ValueError("fold assignment length mismatch")
            if np.any((self.fold < 0) | (self.fold >= N_FOLDS)):
                raise ValueError(f"fold values must lie in 0..{N_FOLDS - 1}")
        self._matrix = None

    @property
    def n(self) -> int:
        return len(self.vectors)

    @property
    def dim(self) -> int:
        return self.vectors[0].dim

    @property
    def active_ratio(self) -> float:
        return float(np.mean(self.labels))

    def feature_matrix(self) -> sp.csr_matrix:
        """CSR 0/1 matrix of shape (n, dim); built once and cached."""
        if self._matrix is None:
            indptr = np.zeros(self.n + 1, dtype=np.int64)
            for i, v in enumerate(self.vectors):
                indptr[i + 1] = indptr[i] + len(v)
            if indptr[-1]:
                indices = np.concatenate([v.indices for v in self.vectors])
            else:
                indices = np.zeros(0, dtype=np.int64)
            data = np.ones(indptr[-1], dtype=np.float64)
            self._matrix = sp.csr_matrix((data, indices, indptr), shape=(self.n, self.dim))
        return self._matrix

    def with_fold(self, fold) -> "LabeledDataset":
        return LabeledDataset(self.vectors, self.labels.copy(), list(self.ids), fold)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        if self.n != other.n or self.dim != other.dim or self.ids != other.ids:
            return False
        if not np.array_equal(self.labels, other.labels):
            return False
        if (self.fold is None) != (other.fold is None):
            return False
        if self.fold is not None and not np.array_equal(self.fold, other.fold):
            return False
        return all(a == b for a, b in zip(self.vectors, other.vectors))


@dataclass(frozen=True)
class Split:
    """Index lists for the train / validation / test partition of a dataset."""

    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "train", np.asarray(self.train, dtype=np.int64))
        object.__setattr__(self, "validation", np.asarray(self.validation, dtype=np.int64))
        object.__setattr__(self, "test", np.asarray(self.test, dtype=np.int64))


@dataclass(eq=False)
class PredictionSet:
    """Per-compound probabilities/logits paired with ground-truth labels.

    The unit every metric consumes. Probabilities and logits are kept
    consistent through the logistic function to within 1e-9.
    """

    probs: np.ndarray
    logits: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        self.logits = np.asarray(self.logits, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n = len(self.probs)
        if not (len(self.logits) == n and len(self.labels) == n):
            raise ValueError("probs, logits, and labels must have equal length")
        if n == 0:
            raise ValueError("empty prediction set")
        if np.any((self.probs < 0.0) | (self.probs > 1.0)):
            raise ValueError("probabilities must lie in [0, 1]")
        if not np.all(np.isfinite(self.logits)):
            raise ValueError("logits must be finite")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise ValueError("labels must be 0 or 1")
        if np.max(np.abs(sigmoid(self.logits) - self.probs)) > CONSISTENCY_TOL:
            raise ValueError("probs and logits disagree through the logistic function")

    @property
    def n(self) -> int:
        return len(self.probs)

    @classmethod
    def from_logits(cls, logits, labels) -> "PredictionSet":
        logits = np.asarray(logits, dtype=np.float64)
        return cls(sigmoid(logits), logits, labels)

    @classmethod
    def from_probs(cls, probs, labels) -> "PredictionSet":
        probs = np.clip(np.asarray(probs, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
        return cls(probs, logit(probs), labels)

    def subset(self, idx) -> "PredictionSet":
        idx = np.asarray(idx, dtype=np.int64)
        return PredictionSet(self.probs[idx], self.logits[idx], self.labels[idx])

    def __eq__(self, other) -> bool:
        if not isinstance(other, PredictionSet):
            return NotImplemented
        return (
            np.array_equal(self.probs, other.probs)
            and np.array_equal(self.logits, other.logits)
            and np.array_equal(self.labels, other.labels)
        )


def _fmt(x: float) -> str:
    # 17 significant digits round-trips any IEEE-754 double exactly.
    return format(float(x), ".17g")


def load_sparse_dataset(path) -> LabeledDataset:
    """Load and validate a sparse feature file.

    Format: line 1 is ``dim=<D> n=<N>``; then N lines of
    ``<id> <label> <idx_1> ... <idx_k>`` with ascending indices. Lines
    starting with ``#`` are comments and may appear anywhere; blank lines are
    ignored. Single-class files are rejected because they cannot be used for
    training or evaluation.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.readlines()
    lines = [
        (k + 1, line.strip())
        for k, line in enumerate(raw)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not lines:
        raise SparseFormatError(f"{path}: no content lines")

    lineno, header = lines[0]
    parts = header.split()
    if len(parts) != 2 or not parts[0].startswith("dim=") or not parts[1].startswith("n="):
        raise SparseFormatError(f"{path}:{lineno}: malformed header {header!r}")
    try:
        dim = int(parts[0][4:])
        n = int(parts[1][2:])
    except ValueError as exc:
        raise SparseFormatError(f"{path}:{lineno}: malformed header {header!r}") from exc
    if dim <= 0 or n <= 0:
        raise SparseFormatError(f"{path}:{lineno}: dim and n must be positive")

    rows = lines[1:]
    if len(rows) != n:
        raise SparseFormatError(f"{path}: header declares n={n} but found {len(rows)} rows")

    vectors, labels, ids = [], [], []
    seen = set()
    for lineno, line in rows:
        tokens = line.split()
        if len(tokens) < 2:
            raise SparseFormatError(f"{path}:{lineno}: need at least id and label")
        cid, lab = tokens[0], tokens[1]
        if lab not in ("0", "1"):
            raise SparseFormatError(f"{path}:{lineno}: label must be 0 or 1, got {lab!r}")
        if cid in seen:
            raise SparseFormatError(f"{path}:{lineno}: duplicate compound id {cid!r}")
        seen.add(cid)
        try:
            idx = np.array([int(t) for t in tokens[2:]], dtype=np.int64)
        except ValueError as exc:
            raise SparseFormatError(f"{path}:{lineno}: non-integer bit index") from exc
        try:
            vec = SparseBinaryVector(dim, idx)
        except ValueError as exc:
            raise SparseFormatError(f"{path}:{lineno}: {exc}") from exc
        vectors.append(vec)
        labels.append(int(lab))
        ids.append(cid)

    labels = np.array(labels, dtype=np.int64)
    if labels.min() == labels.max():
        raise SparseFormatError(f"{path}: single-class dataset (all labels {labels[0]})")
    return LabeledDataset(vectors, labels, ids)


def save_sparse_dataset(ds: LabeledDataset, path) -> None:
    """Write a dataset in the sparse feature format (fold column excluded)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"dim={ds.dim} n={ds.n}\n")
        for vec, lab, cid in zip(ds.vectors, ds.labels, ds.ids):
            bits = " ".join(str(int(i)) for i in vec.indices)
            fh.write(f"{cid} {int(lab)} {bits}\n" if bits else f"{cid} {int(lab)}\n")


def save_predictions(preds: PredictionSet, path, ids=None) -> None:
    """Write a prediction CSV with 17 significant digits per value.

    Columns: optional id, prob, logit, label. `load_predictions` restores the
    values bit-exactly.
    """
    if ids is not None and len(ids) != preds.n:
        raise ValueError("ids length must match prediction set")
    with open(path, "w", encoding="utf-8") as fh:
        if ids is not None:
            fh.write("id,prob,logit,label\n")
            for cid, p, z, y in zip(ids, preds.probs, preds.logits, preds.labels):
                fh.write(f"{cid},{_fmt(p)},{_fmt(z)},{int(y)}\n")
        else:
            fh.write("prob,logit,label\n")
            for p, z, y in zip(preds.probs, preds.logits, preds.labels):
                fh.write(f"{_fmt(p)},{_fmt(z)},{int(y)}\n")


def load_predictions(path):
    """Read a prediction CSV; returns (PredictionSet, ids-or-None)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if not lines:
        raise SparseFormatError(f"{path}: empty prediction file")
    header = lines[0].split(",")
    if header == ["id", "prob", "logit", "label"]:
        has_id = True
    elif header == ["prob", "logit", "label"]:
        has_id = False
    else:
        raise SparseFormatError(f"{path}: unrecognized prediction header {lines[0]!r}")
    ids = [] if has_id else None
    probs, logits, labels = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise SparseFormatError(f"{path}:{lineno}: wrong column count")
        if has_id:
            ids.append(cells[0])
            cells = cells[1:]
        try:
            probs.append(float(cells[0]))
            logits.append(float(cells[1]))
            labels.append(int(cells[2]))
        except ValueError as exc:
            raise SparseFormatError(f"{path}:{lineno}: non-numeric cell") from exc
    return PredictionSet(np.array(probs), np.array(logits), np.array(labels)), ids
