"""Twin-delayed deterministic policy gradient over a bounded 1-D action.

Twin critics bootstrap from the minimum of the two target critics, the target
action is smoothed with clipped Gaussian noise, the actor updates every
``policy_delay``-th critic update, and all three target networks track their
online counterparts through Polyak averaging.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .optim import Adam
from .rng import SeededRng
from . import tensor as T
from .tensor import Tensor


@dataclass
class Td3Config:
    gamma: float = 0.99
    tau: float = 0.005
    policy_delay: int = 2
    explore_noise: float = 0.5
    target_noise: float = 0.5
    noise_clip: float = 1.0
    batch_size: int = 128
    buffer_capacity: int = 100_000
    lo: float = 1.0
    hi: float = 8.0
    hidden: int = 64
    lr: float = 1e-3
    # shrinks per-node policy structure toward a shared hop level; per-node
    # fitness differences below the metric resolution are noise to the actor
    actor_weight_decay: float = 1e-4

    def validate(self) -> None:
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must lie in (0, 1], got {self.tau}")
        if self.policy_delay < 1:
            raise ValueError("policy_delay must be >= 1")
        if self.noise_clip <= 0:
            raise ValueError("noise_clip must be positive")
        if self.batch_size > self.buffer_capacity:
            raise ValueError("batch_size cannot exceed buffer capacity")
        if self.lo >= self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")


class Mlp:
    """input -> hidden -> hidden (relu) -> scalar, with biases."""

    def __init__(self, in_dim: int, hidden: int, rng: SeededRng):
        def glorot(fi, fo):
            limit = np.sqrt(6.0 / (fi + fo))
            return rng.uniform(-limit, limit, (fi, fo))

        # small final-layer init keeps tanh outputs near the midpoint where
        # the gradient is largest, instead of starting half-saturated
        self.weights = [
            Tensor(glorot(in_dim, hidden), name="W1"),
            Tensor(np.zeros(hidden), name="b1"),
            Tensor(glorot(hidden, hidden), name="W2"),
            Tensor(np.zeros(hidden), name="b2"),
            Tensor(rng.uniform(-3e-3, 3e-3, (hidden, 1)), name="W3"),
            Tensor(np.zeros(1), name="b3"),
        ]

    def parameters(self) -> list[Tensor]:
        return list(self.weights)

    def forward(self, x: Tensor, tape=None) -> Tensor:
        w1, b1, w2, b2, w3, b3 = self.weights
        h = T.relu(T.add(T.matmul(x, w1, tape), b1, tape), tape)
        h = T.relu(T.add(T.matmul(h, w2, tape), b2, tape), tape)
        return T.add(T.matmul(h, w3, tape), b3, tape)

    def copy_from(self, other: "Mlp") -> None:
        for mine, theirs in zip(self.weights, other.weights):
            mine.data = theirs.data.copy()


class ActorNet:
    """Deterministic policy mapping a state to an action in [lo, hi]."""

    def __init__(self, state_dim: int, hidden: int, lo: float, hi: float,
                 rng: SeededRng):
        self.net = Mlp(state_dim, hidden, rng)
        self.lo = lo
        self.hi = hi

    def parameters(self) -> list[Tensor]:
        return self.net.parameters()

    def forward(self, states: Tensor, tape=None) -> Tensor:
        u = T.tanh(self.net.forward(states, tape), tape)
        half = (self.hi - self.lo) / 2.0
        mid = (self.hi + self.lo) / 2.0
        shift = Tensor(np.full(u.shape, mid))
        return T.add(T.scale(u, half, tape), shift, tape)

    def act(self, states: np.ndarray) -> np.ndarray:
        """Noise-free actions for a batch of state rows."""
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        return self.forward(Tensor(states)).data.reshape(-1)


class CriticPair:
    """Two independently initialized Q networks over concat(state, action)."""

    def __init__(self, state_dim: int, hidden: int, rng: SeededRng):
        self.q1 = Mlp(state_dim + 1, hidden, rng.fork("critic1"))
        self.q2 = Mlp(state_dim + 1, hidden, rng.fork("critic2"))

    def values_np(self, states: np.ndarray, actions: np.ndarray) -> tuple:
        x = Tensor(np.hstack([states, actions]))
        return (self.q1.forward(x).data, self.q2.forward(x).data)


class TargetNets:
    """Exact copies at creation; afterwards only soft updates touch them."""

    def __init__(self, actor: ActorNet, critics: CriticPair):
        self.actor = ActorNet(actor.net.weights[0].shape[0],
                              actor.net.weights[0].shape[1],
                              actor.lo, actor.hi, SeededRng(0))
        self.actor.net.copy_from(actor.net)
        dummy = SeededRng(0)
        self.critics = CriticPair(critics.q1.weights[0].shape[0] - 1,
                                  critics.q1.weights[0].shape[1], dummy)
        self.critics.q1.copy_from(critics.q1)
        self.critics.q2.copy_from(critics.q2)


def soft_update(online: list[Tensor], target: list[Tensor], tau: float) -> None:
    for p, tp in zip(online, target):
        tp.data = tau * p.data + (1.0 - tau) * tp.data


class ReplayBuffer:
    """Fixed-capacity ring of (s, a, r, s') transitions."""

    def __init__(self, capacity: int, state_dim: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, 1))
        self.rewards = np.zeros((capacity, 1))
        self.next_states = np.zeros((capacity, state_dim))
        self.cursor = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def push(self, state, action: float, reward: float, next_state) -> None:
        i = self.cursor
        self.states[i] = state
        self.actions[i, 0] = action
        self.rewards[i, 0] = reward
        self.next_states[i] = next_state
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: SeededRng):
        """Uniform draw with replacement from live entries."""
        if self.size == 0:
            raise ValueError("cannot sample from an empty replay buffer")
        idx = rng.integers(0, self.size, batch_size)
        return (self.states[idx], self.actions[idx], self.rewards[idx],
                self.next_states[idx])


def select_action(actor: ActorNet, state: np.ndarray, noise_std: float,
                  rng: SeededRng) -> float:
    """Policy action plus exploration noise, clamped to the action bounds."""
    state = np.asarray(state, dtype=np.float64)
    if not np.all(np.isfinite(state)):
        raise ValueError("state contains non-finite values")
    a = float(actor.act(state)[0])
    if noise_std > 0:
        a += float(rng.normal(0.0, noise_std))
    return float(np.clip(a, actor.lo, actor.hi))


def compute_target(batch, targets: TargetNets, config: Td3Config,
                   rng: SeededRng) -> np.ndarray:
    """Bootstrapped values r + gamma * min(Q'1, Q'2) at a smoothed target action."""
    _, _, rewards, next_states = batch
    a2 = targets.actor.act(next_states).reshape(-1, 1)
    eps = np.clip(rng.normal(0.0, config.target_noise, a2.shape),
                  -config.noise_clip, config.noise_clip)
    a2 = np.clip(a2 + eps, config.lo, config.hi)
    q1, q2 = targets.critics.values_np(next_states, a2)
    return rewards + config.gamma * np.minimum(q1, q2)


class Td3Agent:
    """Actor, twin critics, their targets, optimizers, and the replay buffer."""

    def __init__(self, state_dim: int, config: Td3Config, seed: int):
        config.validate()
        self.config = config
        self.state_dim = state_dim
        self.seed = seed
        root = SeededRng(seed)
        self.actor = ActorNet(state_dim, config.hidden, config.lo, config.hi,
                              root.fork("actor-init"))
        self.critics = CriticPair(state_dim, config.hidden, root.fork("critic-init"))
        self.targets = TargetNets(self.actor, self.critics)
        self.buffer = ReplayBuffer(config.buffer_capacity, state_dim)
        self.noise_rng = root.fork("noise")
        self.sample_rng = root.fork("sample")
        self.actor_opt = Adam(self.actor.parameters(), lr=config.lr,
                              weight_decay=config.actor_weight_decay)
        self.critic1_opt = Adam(self.critics.q1.parameters(), lr=config.lr)
        self.critic2_opt = Adam(self.critics.q2.parameters(), lr=config.lr)
        self.update_count = 0
        self.actor_updates = 0

    def select_action(self, state, noise_std: float | None = None) -> float:
        std = self.config.explore_noise if noise_std is None else noise_std
        return select_action(self.actor, state, std, self.noise_rng)


def td3_update(agent: Td3Agent) -> tuple[float, float, float | None] | None:
    """One critic update (both critics), with the periodic actor/target step.

    Returns None while the buffer holds fewer transitions than a batch; that
    is the documented no-op, not an error.
    """
    config = agent.config
    if len(agent.buffer) < config.batch_size:
        return None
    batch = agent.buffer.sample(config.batch_size, agent.sample_rng)
    states, actions, _, _ = batch
    y = Tensor(compute_target(batch, agent.targets, config, agent.noise_rng))

    tape = T.Tape()
    x = Tensor(np.hstack([states, actions]))
    q1 = agent.critics.q1.forward(x, tape)
    q2 = agent.critics.q2.forward(x, tape)
    loss1 = T.mse(q1, y, tape)
    loss2 = T.mse(q2, y, tape)
    tape.backward(T.add(loss1, loss2, tape))
    agent.critic1_opt.step()
    agent.critic2_opt.step()

    agent.update_count += 1
    actor_loss = None
    if agent.update_count % config.policy_delay == 0:
        tape = T.Tape()
        s = Tensor(states)
        a_pi = agent.actor.forward(s, tape)
        q = agent.critics.q1.forward(T.concat_cols([s, a_pi], tape), tape)
        neg_mean_q = T.scale(T.mean_all(q, tape), -1.0, tape)
        tape.backward(neg_mean_q)
        agent.actor_opt.step()  # critic grads computed above are discarded
        agent.actor_updates += 1

        soft_update(agent.actor.parameters(), agent.targets.actor.parameters(),
                    config.tau)
        soft_update(agent.critics.q1.parameters(),
                    agent.targets.critics.q1.parameters(), config.tau)
        soft_update(agent.critics.q2.parameters(),
                    agent.targets.critics.q2.parameters(), config.tau)
        actor_loss = neg_mean_q.item()
    return (loss1.item(), loss2.item(), actor_loss)


def _weights_to_lists(net: Mlp) -> list:
    return [[list(p.shape), p.data.reshape(-1).tolist()] for p in net.weights]


def _lists_to_weights(net: Mlp, blobs: list) -> None:
    for p, (shape, flat) in zip(net.weights, blobs):
        p.data = np.array(flat, dtype=np.float64).reshape(shape)


def _adam_to_lists(opt: Adam) -> dict:
    return {"t": opt.state.t,
            "m": [[list(m.shape), m.reshape(-1).tolist()] for m in opt.state.m],
            "v": [[list(v.shape), v.reshape(-1).tolist()] for v in opt.state.v]}


def _adam_from_lists(opt: Adam, blob: dict) -> None:
    opt.state.t = blob["t"]
    opt.state.m = [np.array(flat, dtype=np.float64).reshape(shape)
                   for shape, flat in blob["m"]]
    opt.state.v = [np.array(flat, dtype=np.float64).reshape(shape)
                   for shape, flat in blob["v"]]


def save_checkpoint(agent: Td3Agent, path: str) -> None:
    """Self-describing JSON blob; save -> load -> save is byte-identical."""
    blob = {
        "format": "grain-td3-checkpoint-v1",
        "state_dim": agent.state_dim,
        "seed": agent.seed,
        "config": asdict(agent.config),
        "update_count": agent.update_count,
        "actor_updates": agent.actor_updates,
        "nets": {
            "actor": _weights_to_lists(agent.actor.net),
            "critic1": _weights_to_lists(agent.critics.q1),
            "critic2": _weights_to_lists(agent.critics.q2),
            "target_actor": _weights_to_lists(agent.targets.actor.net),
            "target_critic1": _weights_to_lists(agent.targets.critics.q1),
            "target_critic2": _weights_to_lists(agent.targets.critics.q2),
        },
        "optimizers": {
            "actor": _adam_to_lists(agent.actor_opt),
            "critic1": _adam_to_lists(agent.critic1_opt),
            "critic2": _adam_to_lists(agent.critic2_opt),
        },
        "rng": {"noise": agent.noise_rng.state(),
                "sample": agent.sample_rng.state()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(blob, fh, sort_keys=True, separators=(",", ":"))


def load_checkpoint(path: str) -> Td3Agent:
    with open(path, encoding="utf-8") as fh:
        blob = json.load(fh)
    if blob.get("format") != "grain-td3-checkpoint-v1":
        raise ValueError(f"unrecognized checkpoint format in {path}")
    config = Td3Config(**blob["config"])
    agent = Td3Agent(blob["state_dim"], config, blob["seed"])
    nets = blob["nets"]
    _lists_to_weights(agent.actor.net, nets["actor"])
    _lists_to_weights(agent.critics.q1, nets["critic1"])
    _lists_to_weights(agent.critics.q2, nets["critic2"])
    _lists_to_weights(agent.targets.actor.net, nets["target_actor"])
    _lists_to_weights(agent.targets.critics.q1, nets["target_critic1"])
    _lists_to_weights(agent.targets.critics.q2, nets["target_critic2"])
    _adam_from_lists(agent.actor_opt, blob["optimizers"]["actor"])
    _adam_from_lists(agent.critic1_opt, blob["optimizers"]["critic1"])
    _adam_from_lists(agent.critic2_opt, blob["optimizers"]["critic2"])
    agent.update_count = blob["update_count"]
    agent.actor_updates = blob["actor_updates"]
    agent.noise_rng.set_state(blob["rng"]["noise"])
    agent.sample_rng.set_state(blob["rng"]["sample"])
    return agent
