"""Figure rendering for benchmark and simulation reports.

Figures are written next to the delimited output so a report directory
carries both the numbers and a picture of them.  The Agg backend keeps
everything headless.
"""

from __future__ import annotations

import logging
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

logger = logging.getLogger(__name__)

_MODE_STYLES = {
    "indexed": {"color": "#1f77b4", "marker": "o"},
    "naive": {"color": "#d62728", "marker": "s"},
}


def render_benchmark_figure(rows: Sequence, path) -> None:
    """Wall time against worker count, one line per mode."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    modes = sorted({row.mode for row in rows})
    for mode in modes:
        points = sorted(
            ((r.workers, r.wall_time_seconds) for r in rows if r.mode == mode)
        )
        style = _MODE_STYLES.get(mode, {})
        ax.plot(
            [p[0] for p in points],
            [p[1] for p in points],
            label=mode,
            **style,
        )
    ax.set_xlabel("workers")
    ax.set_ylabel("wall time (s)")
    ax.set_title("co-occurrence job wall time")
    walls = [r.wall_time_seconds for r in rows]
    if walls and max(walls) > 0 and min(walls) > 0 and max(walls) / min(walls) > 20:
        ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    logger.info("benchmark figure written to %s", path)


def render_sim_figure(report, path) -> None:
    """Executed, cached, and predicted task counts per cluster."""
    clusters = [c.cluster for c in report.per_cluster]
    executed = [c.executed for c in report.per_cluster]
    cached = [c.cached for c in report.per_cluster]
    predicted = [c.predicted_executions for c in report.per_cluster]

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    width = 0.35
    xs = range(len(clusters))
    ax.bar([x - width / 2 for x in xs], executed, width, label="executed", color="#1f77b4")
    ax.bar([x + width / 2 for x in xs], cached, width, label="from cache", color="#2ca02c")
    ax.plot(
        list(xs),
        predicted,
        linestyle="--",
        marker="x",
        color="#d62728",
        label="predicted executions",
    )
    ax.set_xticks(list(xs))
    ax.set_xticklabels(["cluster %d" % c for c in clusters])
    ax.set_ylabel("tasks")
    ax.set_title("task split across co-operating clusters")
    ax.grid(True, axis="y", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    logger.info("simulation figure written to %s", path)
