"""End-to-end pipeline: policy phase, derived actions, classifier phase, report."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .config import TrainConfig, to_flat_dict
from .dataset import LabeledDataset
from .env import FitnessEvaluator, GraphEnv
from .graph import PropagationCache, build_propagation_cache, edge_homophily
from .models import (ActionVector, BaselineModel, FitResult, GranularModel,
                     fit_and_score)
from .rng import SeededRng
from .td3 import ActorNet, Td3Agent, td3_update


@dataclass
class RlLogs:
    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    fitness: list = field(default_factory=list)
    best_rolling_fitness: float = float("-inf")
    evaluations: int = 0
    updates: int = 0


def _clone_actor(actor: ActorNet) -> ActorNet:
    clone = ActorNet(actor.net.weights[0].shape[0], actor.net.weights[0].shape[1],
                     actor.lo, actor.hi, SeededRng(0))
    clone.net.copy_from(actor.net)
    return clone


def derive_actions(actor: ActorNet, dataset: LabeledDataset, k_max: int) -> ActionVector:
    """Noise-free per-node actions, clamped to [1, k_max]."""
    values = np.clip(actor.act(dataset.features), 1.0, float(k_max))
    return ActionVector(values, k_max)


def run_rl_phase(dataset: LabeledDataset, config: TrainConfig,
                 cache: PropagationCache | None = None) -> tuple[ActorNet, RlLogs]:
    """Walk the graph for rl_steps, training the agent off the replay buffer.

    Returns the actor snapshot whose rolling mean fitness (over the last
    episode_len steps) was highest, plus per-step logs.
    """
    config.validate()
    if cache is None:
        cache = build_propagation_cache(dataset.normalized, dataset.features,
                                        config.k_max)
    root = SeededRng(config.seed)
    td3_config = replace(config.td3, lo=1.0, hi=float(config.k_max))
    agent = Td3Agent(dataset.feature_dim, td3_config, root.fork("agent").seed)
    logs = RlLogs()
    if config.rl_steps == 0:
        return agent.actor, logs

    evaluator = FitnessEvaluator(dataset, cache, config.alpha,
                                 config.inner_epochs, config.inner_lr,
                                 seed=root.fork("inner").seed,
                                 quantum=config.action_quantum)
    env = GraphEnv(dataset, evaluator, config.reward,
                   seed=root.fork("env").seed, episode_len=config.episode_len)
    state = env.reset()
    # the snapshot actor owns every fitness value scored during its tenure;
    # keeping a frozen clone lets the best-scoring policy be returned rather
    # than whatever the agent drifted to afterwards
    snapshot_actor = _clone_actor(agent.actor)
    snapshot = derive_actions(snapshot_actor, dataset, config.k_max)
    best_actor = snapshot_actor
    period_fitness: list[float] = []
    period_episodes = 0

    for step in range(config.rl_steps):
        if step < config.rl_warmup_steps:
            # uniform random actions fill the buffer across the whole range,
            # so the critics see the full landscape before the policy moves
            action = float(agent.noise_rng.uniform(1.0, float(config.k_max)))
        else:
            action = agent.select_action(state)
        next_state, reward, info = env.step(action, snapshot)
        agent.buffer.push(state, action, reward, next_state)
        for _ in range(config.rl_updates_per_step):
            td3_update(agent)
        logs.actions.append(action)
        logs.rewards.append(reward)
        logs.fitness.append(info["fitness"])
        period_fitness.append(info["fitness"])

        state = next_state
        if info["done"]:
            period_episodes += 1
            if period_episodes >= config.snapshot_episodes:
                rolling = float(np.mean(period_fitness))
                if rolling > logs.best_rolling_fitness:
                    logs.best_rolling_fitness = rolling
                    best_actor = snapshot_actor
                snapshot_actor = _clone_actor(agent.actor)
                snapshot = derive_actions(snapshot_actor, dataset, config.k_max)
                period_fitness = []
                period_episodes = 0
            state = env.reset()
    logs.evaluations = evaluator.evaluations
    logs.updates = agent.update_count
    return best_actor, logs


def run_gnn_phase(dataset: LabeledDataset, actions: ActionVector,
                  config: TrainConfig, cache: PropagationCache | None = None,
                  alpha: float | None = None) -> tuple[GranularModel, FitResult]:
    """Train the multi-view classifier; checkpoint selection is best-val."""
    config.validate()
    if cache is None:
        cache = build_propagation_cache(dataset.normalized, dataset.features,
                                        config.k_max)
    alpha = config.alpha if alpha is None else alpha
    dims = [dataset.feature_dim] + [config.hidden] * (config.layers - 1) \
        + [dataset.n_classes]
    seed = SeededRng(config.seed).fork("gnn").seed
    model = GranularModel(dims, alpha, config.k_max, config.dropout, seed)
    fit = fit_and_score(model, dataset, actions, config.gnn_epochs,
                        config.gnn_lr, seed, cache=cache,
                        weight_decay=config.weight_decay)
    return model, fit


def run_baselines(dataset: LabeledDataset, config: TrainConfig) -> dict[str, FitResult]:
    """GCN and MLP under the identical protocol (same epochs, lr, selection)."""
    config.validate()
    results = {}
    dims = [dataset.feature_dim, config.hidden, dataset.n_classes]
    for variant, enabled in (("gcn", config.run_gcn), ("mlp", config.run_mlp)):
        if not enabled:
            continue
        seed = SeededRng(config.seed).fork(f"baseline-{variant}").seed
        model = BaselineModel(variant, dims, config.dropout, seed)
        results[variant] = fit_and_score(model, dataset, None, config.gnn_epochs,
                                         config.gnn_lr, seed,
                                         weight_decay=config.weight_decay)
    return results


def _phase_metrics(fit: FitResult) -> dict:
    return {
        "train_accuracy": fit.train_at_best_val,
        "val_accuracy": fit.best_val_accuracy,
        "test_accuracy": fit.test_at_best_val,
        "best_epoch": fit.best_epoch,
        "final_val_accuracy": fit.val_accuracy,
        "final_test_accuracy": fit.test_accuracy,
    }


def pca_2d(matrix: np.ndarray) -> np.ndarray:
    """Project rows onto their top two principal components."""
    centered = matrix - matrix.mean(axis=0, keepdims=True)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    return centered @ vt[:2].T


def action_stats(actions: ActionVector) -> dict:
    values = actions.values
    edges = np.arange(1, actions.k_max + 1)
    hist = np.histogram(values, bins=np.append(edges, actions.k_max + 1e-9))[0]
    return {
        "min": float(values.min()),
        "mean": float(values.mean()),
        "max": float(values.max()),
        "histogram": hist.astype(int).tolist(),
    }


def run_full(dataset: LabeledDataset, config: TrainConfig,
             with_baselines: bool = True):
    """Run every phase and assemble the metrics report.

    Returns (report dict, trained model, derived actions, 2-D embedding).
    """
    started = time.perf_counter()
    config.validate()
    cache = build_propagation_cache(dataset.normalized, dataset.features,
                                    config.k_max)
    policy, rl_logs = run_rl_phase(dataset, config, cache)
    actions = derive_actions(policy, dataset, config.k_max)
    model, fit = run_gnn_phase(dataset, actions, config, cache)
    baselines = run_baselines(dataset, config) if with_baselines else {}

    logits = model.forward(dataset, cache, actions, training=False).data
    embedding = pca_2d(logits)

    report = {
        "dataset": dataset.name,
        "homophily": edge_homophily(dataset.graph, dataset.labels),
        "seed": config.seed,
        "splits_source": dataset.splits_source,
        "config": to_flat_dict(config),
        "grain": _phase_metrics(fit),
        "actions": action_stats(actions),
        "curves": {
            "grain_train_loss": [float(x) for x in fit.train_losses],
            "grain_val_accuracy": [float(x) for x in fit.val_curve],
            "rl_action": [float(x) for x in rl_logs.actions],
            "rl_reward": [float(x) for x in rl_logs.rewards],
            "rl_fitness": [float(x) for x in rl_logs.fitness],
        },
        "rl": {
            "best_rolling_fitness": rl_logs.best_rolling_fitness
            if rl_logs.fitness else 0.0,
            "fitness_evaluations": rl_logs.evaluations,
            "agent_updates": rl_logs.updates,
        },
        "wall_clock_seconds": 0.0,
    }
    for variant, result in baselines.items():
        report[variant] = _phase_metrics(result)
        report["curves"][f"{variant}_train_loss"] = [float(x) for x in
                                                     result.train_losses]
        report["curves"][f"{variant}_val_accuracy"] = [float(x) for x in
                                                       result.val_curve]
    _validate_report(report)
    report["wall_clock_seconds"] = time.perf_counter() - started
    return report, model, actions, embedding


def _validate_report(report: dict) -> None:
    for section in ("grain", "gcn", "mlp"):
        if section not in report:
            continue
        for key, value in report[section].items():
            if key.endswith("accuracy") and not 0.0 <= value <= 1.0:
                raise ValueError(f"{section}.{key} outside [0, 1]: {value}")
    stats = report["actions"]
    k_max = report["config"]["gnn.k_max"]
    if not 1.0 <= stats["min"] <= stats["mean"] <= stats["max"] <= k_max:
        raise ValueError(f"action stats inconsistent with bounds: {stats}")


def emit_report(report: dict, out_dir, embedding: np.ndarray | None = None,
                labels: np.ndarray | None = None, render_figures: bool = True):
    """Write report.json (stable keys), the embedding TSV, and figures.

    Returns the list of files written. The JSON and TSV are the canonical
    outputs; figures are rendered alongside them for quick inspection.
    """
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    report_path = out / "report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")
    written.append(report_path)

    if embedding is not None:
        if labels is None:
            raise ValueError("embedding dump requires labels")
        emb_path = out / "embedding.tsv"
        with open(emb_path, "w", encoding="utf-8") as fh:
            fh.write("node_id\tx\ty\tlabel\n")
            for i in range(embedding.shape[0]):
                fh.write(f"{i}\t{embedding[i, 0]!r}\t{embedding[i, 1]!r}"
                         f"\t{int(labels[i])}\n")
        written.append(emb_path)

    if render_figures:
        from .plots import render_report_figures

        written.extend(render_report_figures(report, out, embedding, labels))
    return written


def read_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
