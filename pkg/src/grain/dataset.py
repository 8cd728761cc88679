"""Labeled graph datasets and split handling."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import CsrGraph, GraphError, normalize_adjacency
from .rng import SeededRng

SPLIT_NAMES = ("train", "val", "test")


@dataclass
class LabeledDataset:
    """Graph, node features, labels, and train/val/test node-id splits.

    ``graph`` is the raw symmetric structure; ``normalized`` carries the
    self-looped renormalized weights every model consumes. Splits are kept
    disjoint; an empty val/test split is tolerated at load time (tiny inputs
    cannot fill three splits) and rejected only when something tries to use it.
    """

    name: str
    graph: CsrGraph
    features: np.ndarray
    labels: np.ndarray
    splits: dict
    n_classes: int
    normalized: CsrGraph = field(default=None, repr=False)
    splits_source: str = "generated"

    def __post_init__(self):
        n = self.graph.n_nodes
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.shape[0] != n:
            raise GraphError(f"feature rows {self.features.shape[0]} != nodes {n}")
        if self.labels.shape[0] != n:
            raise GraphError(f"label count {self.labels.shape[0]} != nodes {n}")
        if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
            raise GraphError(f"labels must lie in [0, {self.n_classes})")
        seen = np.zeros(n, dtype=bool)
        for key in SPLIT_NAMES:
            ids = np.asarray(self.splits.get(key, []), dtype=np.int64)
            self.splits[key] = np.sort(ids)
            if ids.size and (ids.min() < 0 or ids.max() >= n):
                raise GraphError(f"{key} split references a node outside [0, {n})")
            if seen[ids].any():
                raise GraphError(f"{key} split overlaps another split")
            seen[ids] = True
        if self.splits["train"].size == 0:
            raise GraphError("train split is empty")
        if self.normalized is None:
            self.normalized = normalize_adjacency(self.graph)

    @property
    def n_nodes(self) -> int:
        return self.graph.n_nodes

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def split_ids(self, name: str) -> np.ndarray:
        ids = self.splits[name]
        if ids.size == 0:
            raise GraphError(f"{name} split is empty")
        return ids


def stratified_splits(labels: np.ndarray, rng: SeededRng,
                      fractions=(0.6, 0.2, 0.2)) -> dict:
    """Per-class random 60/20/20 split; train keeps at least one node per class."""
    labels = np.asarray(labels)
    out = {k: [] for k in SPLIT_NAMES}
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        members = members[rng.permutation(len(members))]
        m = len(members)
        n_train = max(1, int(round(fractions[0] * m)))
        n_val = int(round(fractions[1] * m))
        n_val = min(n_val, m - n_train)
        out["train"].extend(members[:n_train])
        out["val"].extend(members[n_train:n_train + n_val])
        out["test"].extend(members[n_train + n_val:])
    return {k: np.sort(np.array(v, dtype=np.int64)) for k, v in out.items()}
