"""Render value curves and training logs to image files (headless backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .ddpg import TrainingLog
from .metrics import BacktestReport


def save_curves_figure(reports: list[BacktestReport], path, title: str = "Portfolio value") -> None:
    """One figure, one line per strategy, aligned on dates."""
    if not reports:
        raise ValueError("need at least one report to plot")
    fig, ax = plt.subplots(figsize=(9, 5))
    for report in reports:
        ax.plot(report.dates, report.values, label=report.strategy)
    ax.set_title(title)
    ax.set_xlabel("date")
    ax.set_ylabel("portfolio value")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.autofmt_xdate()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_training_figure(log: TrainingLog, path) -> None:
    """Final portfolio value per training episode."""
    if not log.rows:
        raise ValueError("training log is empty")
    episodes = [r.episode for r in log.rows]
    finals = [r.final_value for r in log.rows]
    fig, ax = plt.subplots(figsize=(9, 5))
    ax.plot(episodes, finals, marker="o", markersize=3)
    ax.set_title("Training progress")
    ax.set_xlabel("episode")
    ax.set_ylabel("final portfolio value")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
