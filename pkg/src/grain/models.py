"""Multi-view hop aggregation models and the GCN/MLP baselines.

The production aggregator blends, per node, the average of its 1..<a> hop
propagated features with an alpha-weighted residual of the layer input, plus
two fractional terms that leak information from the rounded hop and one hop
beyond it. A per-node reference recursion (nonlinearities interleaved between
hops) is kept alongside it; the two are intentionally not equivalent.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import LabeledDataset
from .graph import CsrGraph, GraphError, PropagationCache
from .optim import Adam
from .rng import SeededRng
from . import tensor as T
from .tensor import Tensor


def round_half_up(a: np.ndarray) -> np.ndarray:
    """Round to nearest integer, halves away from zero (2.5 -> 3)."""
    return np.floor(np.asarray(a) + 0.5).astype(np.int64)


@dataclass
class ActionVector:
    """Per-node continuous hop counts, bounded to [1, k_max]."""

    values: np.ndarray
    k_max: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("actions must be finite")
        if self.values.size and (self.values.min() < 1.0 or self.values.max() > self.k_max):
            raise ValueError(
                f"actions must lie in [1, {self.k_max}], got range "
                f"[{self.values.min()}, {self.values.max()}]")

    @classmethod
    def constant(cls, value: float, n: int, k_max: int) -> "ActionVector":
        return cls(np.full(n, float(value)), k_max)

    def __len__(self) -> int:
        return self.values.size

    def rounded(self) -> np.ndarray:
        return round_half_up(self.values)

    def fractional_parts(self) -> tuple[np.ndarray, np.ndarray]:
        """Coefficients of the two implicit terms; both exactly 0.0 at integers."""
        low = self.values - np.floor(self.values)
        high = np.ceil(self.values) - self.values
        return low, high


def hop_coefficients(actions: ActionVector, alpha: float) -> np.ndarray:
    """Per-node weight of each propagated power P_k in the combined output.

    Column k holds (1-alpha)/<a> for k <= <a>, plus the fractional-part
    weights at k = <a> and k = <a>+1. Column 0 is unused (the alpha residual
    on the layer input is applied separately).
    """
    kbar = actions.rounded()
    frac_low, frac_high = actions.fractional_parts()
    needed = int(kbar.max()) + 1
    n = len(actions)
    coeffs = np.zeros((n, needed + 1))
    per_hop = (1.0 - alpha) / kbar
    for k in range(1, needed + 1):
        coeffs[:, k] = np.where(k <= kbar, per_hop, 0.0)
    rows = np.arange(n)
    coeffs[rows, kbar] += frac_low
    coeffs[rows, kbar + 1] += frac_high
    return coeffs


def granular_combine(cache: PropagationCache, actions: ActionVector,
                     alpha: float, h: np.ndarray | None = None) -> np.ndarray:
    """Combine cached propagations into one matrix of per-node views.

    ``h`` defaults to the cache's own input matrix; pass the current layer
    input when combining hidden states.
    """
    if h is None:
        h = cache.matrices[0]
    coeffs = hop_coefficients(actions, alpha)
    needed = coeffs.shape[1] - 1
    if cache.depth < needed:
        raise GraphError(
            f"cache depth {cache.depth} insufficient, need {needed}")
    out = alpha * np.asarray(h, dtype=np.float64)
    for k in range(1, needed + 1):
        col = coeffs[:, k]
        if np.any(col):
            out = out + col[:, None] * cache.matrices[k]
    return out


def deepest_used_power(coeffs: np.ndarray) -> int:
    """Index of the deepest propagation power with any nonzero weight."""
    nonzero = np.flatnonzero(coeffs.any(axis=0))
    return int(nonzero.max()) if nonzero.size else 0


def combine_on_tape(p_list: list[Tensor], h: Tensor, actions: ActionVector,
                    alpha: float, tape) -> Tensor:
    """Differentiable form of :func:`granular_combine` over tensor powers."""
    coeffs = hop_coefficients(actions, alpha)
    needed = deepest_used_power(coeffs)
    if len(p_list) - 1 < needed:
        raise GraphError(
            f"propagated {len(p_list) - 1} powers, need {needed}")
    out = T.scale(h, alpha, tape)
    for k in range(1, needed + 1):
        col = coeffs[:, k]
        if np.any(col):
            out = T.add(out, T.scale_rows(p_list[k], col, tape), tape)
    return out


def reference_aggregate(normalized: CsrGraph, features: np.ndarray, v: int,
                        a: float) -> np.ndarray:
    """Per-node recursive aggregation with relu between every hop (weightless).

    Propagates all nodes k times with H^k = relu(A_hat H^{k-1}), then blends
    node v's deepest vector (scaled by 1/<a>) with fractionally weighted
    one-hop aggregations of the two deepest levels.
    """
    if not 1.0 <= a:
        raise ValueError(f"action must be >= 1, got {a}")
    if normalized.weights is None:
        raise GraphError("reference_aggregate requires a normalized graph")
    adj = normalized.to_scipy()
    kbar = int(round_half_up(np.array([a]))[0])
    levels = [np.asarray(features, dtype=np.float64)]
    for _ in range(kbar):
        levels.append(np.maximum(adj @ levels[-1], 0.0))
    frac_low = a - np.floor(a)
    frac_high = np.ceil(a) - a
    row = adj.getrow(v)
    h_v = levels[kbar][v] / kbar
    if frac_low:
        h_v = h_v + frac_low * (row @ levels[kbar - 1]).ravel()
    if frac_high:
        h_v = h_v + frac_high * (row @ levels[kbar]).ravel()
    return h_v


def _glorot(rng: SeededRng, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, (fan_in, fan_out))


class GranularModel:
    """Stacked layers of hop-combined aggregation followed by a linear map.

    Layer 1 consumes a precomputed propagation cache of the input features;
    deeper layers propagate their hidden input on the fly, so gradients flow
    through the propagation. The learnable parameter count depends only on
    the layer widths, never on k_max or the actions.
    """

    def __init__(self, dims: list[int], alpha: float, k_max: int,
                 dropout: float, seed: int):
        if len(dims) < 2:
            raise ValueError("need at least input and output dims")
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
        self.alpha = alpha
        self.k_max = k_max
        self.dropout = dropout
        self.dims = list(dims)
        rng = SeededRng(seed).fork("granular-init")
        self.weights = [Tensor(_glorot(rng, dims[i], dims[i + 1]), name=f"W{i + 1}")
                        for i in range(len(dims) - 1)]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self) -> list[Tensor]:
        return list(self.weights)

    def param_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def forward(self, dataset: LabeledDataset, cache: PropagationCache,
                actions: ActionVector, training: bool, rng: SeededRng | None = None,
                tape=None, z0: np.ndarray | None = None) -> Tensor:
        """Log-probability rows for every node."""
        if z0 is None:
            z0 = granular_combine(cache, actions, self.alpha)
        needed = deepest_used_power(hop_coefficients(actions, self.alpha))
        adj = dataset.normalized.to_scipy()
        hidden = T.matmul(Tensor(z0), self.weights[0], tape)
        for w in self.weights[1:]:
            hidden = T.relu(hidden, tape)
            if training:
                hidden = T.dropout(hidden, self.dropout, rng, True, tape)
            powers = [hidden]
            for _ in range(needed):
                powers.append(T.spmm(adj, powers[-1], tape))
            combined = combine_on_tape(powers, hidden, actions, self.alpha, tape)
            hidden = T.matmul(combined, w, tape)
        return T.log_softmax(hidden, tape)


class BaselineModel:
    """Two-layer GCN or MLP with the same head and training protocol."""

    def __init__(self, variant: str, dims: list[int], dropout: float, seed: int):
        if variant not in ("gcn", "mlp"):
            raise ValueError(f"unknown baseline variant {variant!r}")
        if len(dims) != 3:
            raise ValueError("baselines are two-layer models")
        self.variant = variant
        self.dropout = dropout
        rng = SeededRng(seed).fork(f"{variant}-init")
        self.weights = [Tensor(_glorot(rng, dims[0], dims[1]), name="W1"),
                        Tensor(_glorot(rng, dims[1], dims[2]), name="W2")]

    def parameters(self) -> list[Tensor]:
        return list(self.weights)

    def forward(self, dataset: LabeledDataset, cache=None, actions=None,
                training: bool = False, rng: SeededRng | None = None,
                tape=None, z0=None) -> Tensor:
        adj = dataset.normalized.to_scipy() if self.variant == "gcn" else None
        hidden = Tensor(dataset.features)
        for i, w in enumerate(self.weights):
            hidden = T.matmul(hidden, w, tape)
            if adj is not None:
                hidden = T.spmm(adj, hidden, tape)
            if i < len(self.weights) - 1:
                hidden = T.relu(hidden, tape)
                if training:
                    hidden = T.dropout(hidden, self.dropout, rng, True, tape)
        return T.log_softmax(hidden, tape)


def accuracy(logp: np.ndarray, labels: np.ndarray, ids: np.ndarray) -> float:
    """Fraction of correct argmax predictions; ties go to the lowest class."""
    pred = np.argmax(logp[ids], axis=1)
    return float((pred == labels[ids]).mean())


@dataclass
class FitResult:
    model: object
    train_losses: list = field(default_factory=list)
    train_curve: list = field(default_factory=list)
    val_curve: list = field(default_factory=list)
    test_curve: list = field(default_factory=list)
    val_accuracy: float = 0.0
    test_accuracy: float = 0.0

    @property
    def best_epoch(self) -> int:
        return int(np.argmax(self.val_curve))

    @property
    def best_val_accuracy(self) -> float:
        return self.val_curve[self.best_epoch]

    @property
    def test_at_best_val(self) -> float:
        return self.test_curve[self.best_epoch]

    @property
    def train_at_best_val(self) -> float:
        return self.train_curve[self.best_epoch]


def fit_and_score(model, dataset: LabeledDataset, actions: ActionVector | None,
                  epochs: int, lr: float, seed: int,
                  cache: PropagationCache | None = None,
                  weight_decay: float = 0.0) -> FitResult:
    """Full-batch NLL training on the train split; accuracies tracked per epoch."""
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    train_ids = dataset.split_ids("train")
    val_ids = dataset.split_ids("val")
    test_ids = dataset.split_ids("test")
    rng = SeededRng(seed).fork("fit-dropout")
    optimizer = Adam(model.parameters(), lr=lr, weight_decay=weight_decay)

    z0 = None
    if isinstance(model, GranularModel):
        if cache is None:
            raise GraphError("GranularModel training requires a propagation cache")
        z0 = granular_combine(cache, actions, model.alpha)

    result = FitResult(model=model)
    for _ in range(epochs):
        tape = T.Tape()
        logp = model.forward(dataset, cache, actions, training=True, rng=rng,
                             tape=tape, z0=z0)
        loss = T.nll_loss(logp, dataset.labels[train_ids], tape, rows=train_ids)
        tape.backward(loss)
        optimizer.step()

        eval_logp = model.forward(dataset, cache, actions, training=False,
                                  z0=z0).data
        result.train_losses.append(loss.item())
        result.train_curve.append(accuracy(eval_logp, dataset.labels, train_ids))
        result.val_curve.append(accuracy(eval_logp, dataset.labels, val_ids))
        result.test_curve.append(accuracy(eval_logp, dataset.labels, test_ids))
    result.val_accuracy = result.val_curve[-1]
    result.test_accuracy = result.test_curve[-1]
    return result
