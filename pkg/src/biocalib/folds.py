"""Chemically aware cross-validation folds.

Compounds are grouped by Tanimoto similarity with leader (sphere-exclusion)
clustering, then whole clusters are assigned to folds so that test chemistry
diverges from training chemistry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset, SparseBinaryVector, Split, N_FOLDS

DEFAULT_CLUSTER_THRESHOLD = 0.6


@dataclass(frozen=True)
class ClusterAssignment:
    """Cluster index per sample plus the leader sample of each cluster."""

    cluster_of: np.ndarray
    leaders: np.ndarray
    threshold: float

    @property
    def n_clusters(self) -> int:
        return len(self.leaders)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.cluster_of, minlength=self.n_clusters)


def tanimoto(a: SparseBinaryVector, b: SparseBinaryVector) -> float:
    """Set intersection over union of the two bit sets.

    Both-empty vectors compare as 1.0 so identical compounds always
    co-cluster.
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    inter = np.intersect1d(a.indices, b.indices, assume_unique=True).size
    union = len(a) + len(b) - inter
    if union == 0:
        return 1.0
    return inter / union


def leader_cluster(ds: LabeledDataset, threshold: float = DEFAULT_CLUSTER_THRESHOLD,
                   seed: int = 0) -> ClusterAssignment:
    """Leader clustering: visit samples in seeded random order; each not yet
    assigned becomes a leader and absorbs every unassigned sample within the
    Tanimoto threshold.

    Every member's similarity to its cluster leader is >= threshold.
    """
    if not (0.0 < threshold <= 1.0):
        raise ValueError("threshold must lie in (0, 1]")
    n = ds.n
    X = ds.feature_matrix()
    pop = np.asarray(X.sum(axis=1)).ravel()
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)

    cluster_of = np.full(n, -1, dtype=np.int64)
    leaders = []
    for i in order:
        if cluster_of[i] >= 0:
            continue
        cid = len(leaders)
        leaders.append(i)
        free = np.flatnonzero(cluster_of < 0)
        inter = np.asarray(X[free] @ X[i].T.todense()).ravel()
        union = pop[free] + pop[i] - inter
        sims = np.where(union > 0, inter / np.maximum(union, 1), 1.0)
        cluster_of[free[sims >= threshold]] = cid
        cluster_of[i] = cid
    return ClusterAssignment(cluster_of, np.array(leaders, dtype=np.int64), threshold)


def assign_folds(clusters: ClusterAssignment, k: int = N_FOLDS, seed: int = 0) -> np.ndarray:
    """Assign whole clusters to k folds with a seeded greedy balancer.

    Clusters are taken in descending size order (equal sizes shuffled by the
    seed) and each goes to the currently smallest fold, ties broken at
    random. All members of a cluster share a fold.
    """
    if k < 2:
        raise ValueError("need at least 2 folds")
    sizes = clusters.sizes()
    n_clusters = clusters.n_clusters
    if n_clusters < k:
        raise ValueError(f"only {n_clusters} clusters for {k} folds")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n_clusters)
    order = order[np.argsort(-sizes[order], kind="stable")]

    fold_of_cluster = np.empty(n_clusters, dtype=np.int64)
    load = np.zeros(k, dtype=np.int64)
    for cid in order:
        candidates = np.flatnonzero(load == load.min())
        f = int(rng.choice(candidates))
        fold_of_cluster[cid] = f
        load[f] += sizes[cid]
    return fold_of_cluster[clusters.cluster_of]


def make_split(ds: LabeledDataset, test_fold: int, val_fold: int) -> Split:
    """Build the train/validation/test index split from the fold column.

    The validation fold is excluded from training; every partition must be
    non-empty and contain both classes.
    """
    if ds.fold is None:
        raise ValueError("dataset has no fold assignment")
    if test_fold == val_fold:
        raise ValueError("test and validation folds must differ")
    for name, f in (("test", test_fold), ("validation", val_fold)):
        if not (0 <= f < N_FOLDS):
            raise ValueError(f"{name} fold index {f} out of range 0..{N_FOLDS - 1}")
    test = np.flatnonzero(ds.fold == test_fold)
    validation = np.flatnonzero(ds.fold == val_fold)
    train = np.flatnonzero((ds.fold != test_fold) & (ds.fold != val_fold))
    for name, idx in (("train", train), ("validation", validation), ("test", test)):
        if idx.size == 0:
            raise ValueError(f"{name} partition is empty")
        labs = ds.labels[idx]
        if labs.min() == labs.max():
            raise ValueError(f"{name} partition contains a single class")
    return Split(train, validation, test)


def save_fold_file(ds: LabeledDataset, path) -> None:
    """Write one `<id> <fold>` line per sample."""
    if ds.fold is None:
        raise ValueError("dataset has no fold assignment")
    with open(path, "w", encoding="utf-8") as fh:
        for cid, f in zip(ds.ids, ds.fold):
            fh.write(f"{cid} {int(f)}\n")


def load_fold_file(path, ds: LabeledDataset) -> np.ndarray:
    """Read a fold file and align it to the dataset's id order."""
    mapping = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected '<id> <fold>'")
            mapping[parts[0]] = int(parts[1])
    missing = [cid for cid in ds.ids if cid not in mapping]
    if missing:
        raise ValueError(f"{path}: no fold for ids {missing[:5]}...")
    return np.array([mapping[cid] for cid in ds.ids], dtype=np.int64)
