"""Figure rendering for the report path (PNG files next to the JSON/TSV)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def render_report_figures(report: dict, out_dir, embedding=None,
                          labels=None) -> list[Path]:
    out = Path(out_dir)
    written = []
    curves = report.get("curves", {})

    loss_keys = [k for k in ("grain_train_loss", "gcn_train_loss", "mlp_train_loss")
                 if curves.get(k)]
    if loss_keys:
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
        for key in loss_keys:
            ax1.plot(curves[key], label=key.replace("_train_loss", ""))
        ax1.set_xlabel("epoch")
        ax1.set_ylabel("train loss")
        ax1.legend()
        for key in ("grain_val_accuracy", "gcn_val_accuracy", "mlp_val_accuracy"):
            if curves.get(key):
                ax2.plot(curves[key], label=key.replace("_val_accuracy", ""))
        ax2.set_xlabel("epoch")
        ax2.set_ylabel("val accuracy")
        ax2.legend()
        fig.suptitle(f"{report['dataset']} (H={report['homophily']:.2f})")
        written.append(_save(fig, out / "fig_training.png"))

    if curves.get("rl_fitness"):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
        fitness = np.asarray(curves["rl_fitness"])
        ax1.plot(fitness, alpha=0.3, lw=0.5)
        width = min(64, len(fitness))
        if len(fitness) >= width > 1:
            smooth = np.convolve(fitness, np.ones(width) / width, mode="valid")
            ax1.plot(np.arange(width - 1, len(fitness)), smooth)
        ax1.set_xlabel("env step")
        ax1.set_ylabel("fitness")
        ax2.plot(curves["rl_action"], ",", alpha=0.5)
        ax2.set_xlabel("env step")
        ax2.set_ylabel("explored action")
        written.append(_save(fig, out / "fig_policy.png"))

    stats = report.get("actions", {})
    if stats.get("histogram"):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        hist = stats["histogram"]
        ax.bar(np.arange(1, len(hist) + 1) + 0.5, hist, width=0.9)
        ax.set_xlabel("derived hop count")
        ax.set_ylabel("nodes")
        written.append(_save(fig, out / "fig_actions.png"))

    if embedding is not None and labels is not None:
        fig, ax = plt.subplots(figsize=(5, 4.5))
        scatter = ax.scatter(embedding[:, 0], embedding[:, 1], c=labels,
                             s=8, cmap="tab10", alpha=0.8)
        fig.colorbar(scatter, ax=ax, label="class")
        ax.set_xlabel("pc1")
        ax.set_ylabel("pc2")
        written.append(_save(fig, out / "fig_embedding.png"))
    return written
