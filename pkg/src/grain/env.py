"""The hop-granularity decision process over a labeled graph.

A state is the raw feature row of the current node, the action is a
continuous hop count, the reward is the windowed average of fitness
improvements, and the next node is drawn uniformly from the rounded-hop
neighborhood (falling back to the train split at isolated nodes).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import LabeledDataset
from .graph import PropagationCache, khop_neighborhood
from .models import ActionVector, hop_coefficients, round_half_up
from .optim import Adam
from .rng import SeededRng
from . import tensor as T
from .tensor import Tensor


@dataclass
class RewardConfig:
    scale: float = 10.0   # strength multiplier on the improvement signal
    window: int = 5       # how many historical steps the average looks back

    def validate(self) -> None:
        if self.scale <= 0:
            raise ValueError(f"reward scale must be positive, got {self.scale}")
        if self.window < 0:
            raise ValueError(f"reward window must be >= 0, got {self.window}")


def compute_reward(history, config: RewardConfig) -> float:
    """Windowed mean improvement of the latest fitness over its predecessors.

    The current step compares against itself too (contributing exactly zero),
    and the divisor shrinks at the start of an episode when fewer than
    ``window`` predecessors exist.
    """
    if len(history) == 0:
        raise ValueError("reward requires a nonempty fitness history")
    t = len(history) - 1
    lo = max(0, t - config.window)
    current = history[t]
    total = sum(current - history[l] for l in range(lo, t + 1))
    return config.scale * total / (min(config.window, t) + 1)


@dataclass
class EnvState:
    node: int
    t: int = 0
    history: list = field(default_factory=list)


class FitnessEvaluator:
    """Validation accuracy of a one-layer probe, as a function of one node's hop.

    All nodes take the policy snapshot's actions except the queried node;
    the probe trains a single linear head on the pre-combined features for a
    fixed, small number of epochs from a fixed seed. Results are memoized on
    (node, action quantized to 0.1 hop) and the memo resets whenever the
    snapshot changes.
    """

    def __init__(self, dataset: LabeledDataset, cache: PropagationCache,
                 alpha: float, inner_epochs: int = 60, inner_lr: float = 0.5,
                 seed: int = 0, quantum: float = 0.1):
        self.dataset = dataset
        self.cache = cache
        self.alpha = alpha
        self.inner_epochs = inner_epochs
        self.inner_lr = inner_lr
        self.seed = seed
        self.quantum = quantum
        self.k_max = cache.k_max
        self.train_ids = dataset.split_ids("train")
        self.val_ids = dataset.split_ids("val")
        self._train_pos = {int(v): i for i, v in enumerate(self.train_ids)}
        self._val_pos = {int(v): i for i, v in enumerate(self.val_ids)}
        self._snapshot: ActionVector | None = None
        self._z_train: np.ndarray | None = None
        self._z_val: np.ndarray | None = None
        self._memo: dict[tuple[int, int], float] = {}
        self.evaluations = 0

    def set_snapshot(self, actions: ActionVector) -> None:
        from .models import granular_combine

        z = granular_combine(self.cache, actions, self.alpha)
        self._z_train = z[self.train_ids]
        self._z_val = z[self.val_ids]
        self._snapshot = actions
        self._memo.clear()

    def _combined_row(self, v: int, a: float) -> np.ndarray:
        single = ActionVector(np.array([a]), self.k_max)
        coeffs = hop_coefficients(single, self.alpha)[0]
        row = self.alpha * self.dataset.features[v].astype(np.float64)
        for k in range(1, coeffs.shape[0]):
            if coeffs[k]:
                row = row + coeffs[k] * self.cache.matrices[k][v]
        return row

    def fitness(self, v: int, a: float, snapshot: ActionVector) -> float:
        if not 1.0 <= a <= self.k_max:
            raise ValueError(f"action {a} outside [1, {self.k_max}]")
        if snapshot is not self._snapshot:
            self.set_snapshot(snapshot)
        key = (int(v), int(round(a / self.quantum)))
        if key in self._memo:
            return self._memo[key]

        z_train = self._z_train
        z_val = self._z_val
        if v in self._train_pos:
            z_train = z_train.copy()
            z_train[self._train_pos[v]] = self._combined_row(v, a)
        if v in self._val_pos:
            z_val = z_val.copy()
            z_val[self._val_pos[v]] = self._combined_row(v, a)

        value = self._probe_accuracy(z_train, z_val)
        self._memo[key] = value
        self.evaluations += 1
        return value

    def _probe_accuracy(self, z_train: np.ndarray, z_val: np.ndarray) -> float:
        labels = self.dataset.labels
        rng = SeededRng(self.seed).fork("probe-init")
        d = z_train.shape[1]
        c = self.dataset.n_classes
        limit = np.sqrt(6.0 / (d + c))
        w = Tensor(rng.uniform(-limit, limit, (d, c)), name="probe")
        opt = Adam([w], lr=self.inner_lr)
        x = Tensor(z_train)
        y = labels[self.train_ids]
        for _ in range(self.inner_epochs):
            tape = T.Tape()
            loss = T.nll_loss(T.log_softmax(T.matmul(x, w, tape), tape), y, tape)
            tape.backward(loss)
            opt.step()
        pred = np.argmax(z_val @ w.data, axis=1)
        return float((pred == labels[self.val_ids]).mean())


# spec-facing alias: inner_fitness(evaluator, v, a, snapshot)
def inner_fitness(evaluator: FitnessEvaluator, v: int, a: float,
                  snapshot: ActionVector) -> float:
    return evaluator.fitness(v, a, snapshot)


class GraphEnv:
    """Episodic environment walking the graph under hop-count actions."""

    def __init__(self, dataset: LabeledDataset, evaluator: FitnessEvaluator,
                 reward_config: RewardConfig, seed: int, episode_len: int = 64):
        reward_config.validate()
        self.dataset = dataset
        self.evaluator = evaluator
        self.reward_config = reward_config
        self.episode_len = episode_len
        self.rng = SeededRng(seed).fork("env")
        self.state: EnvState | None = None

    def reset(self) -> np.ndarray:
        train = self.dataset.split_ids("train")
        node = int(train[self.rng.integers(0, train.size)])
        self.state = EnvState(node=node)
        return self.dataset.features[node].copy()

    def step(self, action: float, snapshot: ActionVector):
        """Returns (next_state, reward, info); info carries fitness and done."""
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        if not np.isfinite(action):
            raise ValueError(f"action must be finite, got {action}")
        st = self.state
        fit = self.evaluator.fitness(st.node, float(action), snapshot)
        st.history.append(fit)
        reward = compute_reward(st.history, self.reward_config)

        kbar = int(round_half_up(np.array([action]))[0])
        hood = khop_neighborhood(self.dataset.graph, st.node, kbar)
        if hood:
            ordered = sorted(hood)
            nxt = ordered[self.rng.integers(0, len(ordered))]
        else:
            train = self.dataset.split_ids("train")
            nxt = int(train[self.rng.integers(0, train.size)])
        st.t += 1
        done = st.t >= self.episode_len
        info = {"fitness": fit, "node": st.node, "next_node": nxt, "done": done}
        st.node = nxt
        return self.dataset.features[nxt].copy(), reward, info
