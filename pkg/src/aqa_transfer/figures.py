"""Figure rendering for run outputs (PNG files next to the CSVs)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .protocols import RunHistory


def plot_history(history: RunHistory, path: str | Path, title: str = "") -> None:
    """Training loss and per-action test correlation against iteration."""
    iters = [p.iteration for p in history.points]
    fig, (ax_loss, ax_rho) = plt.subplots(1, 2, figsize=(10, 4))
    ax_loss.plot(iters, [p.train_loss for p in history.points], color="tab:gray")
    ax_loss.set_xlabel("iteration")
    ax_loss.set_ylabel("training loss")
    ax_loss.set_yscale("log")
    for action in history.points[0].rho_by_action:
        ax_rho.plot(
            iters,
            [p.rho_by_action[action] for p in history.points],
            label=action,
        )
    ax_rho.set_xlabel("iteration")
    ax_rho.set_ylabel("test Spearman rho")
    ax_rho.set_ylim(-1, 1)
    ax_rho.legend(fontsize=7)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_transfer_matrix(
    actions: list[str], mat: np.ndarray, path: str | Path
) -> None:
    """Heatmap of train-class x test-class rank correlations."""
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(mat, vmin=-1, vmax=1, cmap="RdBu_r")
    ax.set_xticks(range(len(actions)), actions, rotation=45, ha="right")
    ax.set_yticks(range(len(actions)), actions)
    ax.set_xlabel("test class")
    ax.set_ylabel("train class")
    for i in range(len(actions)):
        for j in range(len(actions)):
            ax.text(j, i, f"{mat[i, j]:.2f}", ha="center", va="center",
                    fontsize=7)
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_finetune_comparison(
    pretrained: RunHistory,
    scratch: RunHistory,
    action: str,
    path: str | Path,
) -> None:
    """Pretrained vs random-init test correlation during fine-tuning."""
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(
        [p.iteration for p in pretrained.points],
        [p.rho_by_action[action] for p in pretrained.points],
        label="pretrained",
        color="tab:blue",
    )
    ax.plot(
        [p.iteration for p in scratch.points],
        [p.rho_by_action[action] for p in scratch.points],
        label="random init",
        color="tab:red",
    )
    ax.set_xlabel("iteration")
    ax.set_ylabel(f"test Spearman rho ({action})")
    ax.set_ylim(-1, 1)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
