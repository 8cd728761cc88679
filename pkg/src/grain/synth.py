"""Synthetic graphs with a controllable edge-homophily level."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import LabeledDataset, stratified_splits
from .graph import GraphError, build_graph
from .rng import SeededRng


@dataclass
class SynthConfig:
    n: int
    n_classes: int
    h_target: float
    avg_degree: float = 10.0
    feature_dim: int = 16
    class_separation: float = 1.5
    seed: int = 0

    def validate(self) -> None:
        if self.n < self.n_classes:
            raise GraphError(f"need n >= classes, got {self.n} < {self.n_classes}")
        if not 0.0 <= self.h_target <= 1.0:
            raise GraphError(f"h_target must lie in [0, 1], got {self.h_target}")
        if self.avg_degree <= 0:
            raise GraphError(f"avg_degree must be positive, got {self.avg_degree}")
        if self.class_separation < 0:
            raise GraphError("class_separation must be nonnegative")
        if self.n_classes == 1 and self.h_target < 1.0:
            raise GraphError("cannot place inter-class edges with a single class")
        if self.feature_dim < self.n_classes:
            raise GraphError(
                f"orthogonal class means need feature_dim >= classes, "
                f"got {self.feature_dim} < {self.n_classes}")


def generate_synthetic(config: SynthConfig) -> LabeledDataset:
    """Sample a labeled graph whose edge homophily concentrates on h_target.

    Labels are uniform (every class appears at least once); each of the
    floor(n*avg_degree/2) distinct undirected edges is intra-class with
    probability h_target, otherwise it joins two uniformly random nodes of
    different classes. Features are orthogonal class means scaled by
    class_separation plus unit Gaussian noise. Everything is deterministic
    given the seed.
    """
    config.validate()
    rng = SeededRng(config.seed)
    n, c = config.n, config.n_classes

    labels = rng.integers(0, c, n)
    labels[:c] = np.arange(c)
    labels = labels[rng.permutation(n)]

    by_class = [np.flatnonzero(labels == k) for k in range(c)]
    not_class = [np.flatnonzero(labels != k) for k in range(c)]
    intra_pool = np.flatnonzero([len(by_class[labels[u]]) >= 2 for u in range(n)])
    if config.h_target > 0 and intra_pool.size == 0:
        raise GraphError("no class has two members; intra-class edges impossible")

    target = int(n * config.avg_degree / 2)
    edges: set[tuple[int, int]] = set()
    attempts = 0
    while len(edges) < target:
        attempts += 1
        if attempts > 200 * target + 1000:
            raise GraphError(
                f"could not place {target} distinct edges (graph too dense)")
        if rng.random() < config.h_target:
            u = int(intra_pool[rng.integers(0, intra_pool.size)])
            peers = by_class[labels[u]]
            v = u
            while v == u:
                v = int(peers[rng.integers(0, peers.size)])
        else:
            u = int(rng.integers(0, n))
            others = not_class[labels[u]]
            v = int(others[rng.integers(0, others.size)])
        pair = (u, v) if u < v else (v, u)
        edges.add(pair)

    means = np.zeros((c, config.feature_dim))
    means[np.arange(c), np.arange(c)] = config.class_separation
    features = means[labels] + rng.normal(size=(n, config.feature_dim))

    splits = stratified_splits(labels, rng)
    name = f"synth-n{n}-c{c}-h{config.h_target:g}"
    return LabeledDataset(name=name, graph=build_graph(sorted(edges), n),
                          features=features, labels=labels, splits=splits,
                          n_classes=c)
