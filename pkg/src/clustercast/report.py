"""Render figures from a finished run directory.

The delimited files stay the authoritative output; the figures are derived
views for eyeballing queue behaviour and delivery latency.
"""

from __future__ import annotations

import csv
import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

TOP_LINKS = 8


def render_report(run_dir: str, out_dir: str | None = None) -> list[str]:
    """Write queue and delay figures next to (or instead of) the run files."""
    out_dir = out_dir or run_dir
    os.makedirs(out_dir, exist_ok=True)
    written = []

    links_path = os.path.join(run_dir, "links.csv")
    if os.path.exists(links_path):
        written.append(_queue_figure(links_path, out_dir))

    messages_path = os.path.join(run_dir, "messages.csv")
    if os.path.exists(messages_path):
        written.append(_delay_figure(messages_path, out_dir))
    return [p for p in written if p]


def _queue_figure(links_path: str, out_dir: str) -> str | None:
    series: dict[str, list[tuple[int, int]]] = defaultdict(list)
    congested: list[tuple[int, int]] = []
    with open(links_path, newline="") as fh:
        for row in csv.DictReader(fh):
            window = int(row["window_start"])
            q_len = int(row["q_len"])
            series[row["link"]].append((window, q_len))
            if row["congested"] == "1":
                congested.append((window, q_len))
    if not series:
        return None

    top = sorted(series.items(), key=lambda kv: (-max(q for _, q in kv[1]), kv[0]))[:TOP_LINKS]
    fig, ax = plt.subplots(figsize=(9, 5))
    for name, points in top:
        points.sort()
        ax.step([w for w, _ in points], [q for _, q in points], where="post", label=name)
    if congested:
        ax.scatter([w for w, _ in congested], [q for _, q in congested],
                   marker="x", s=18, color="black", label="congested window", zorder=5)
    ax.set_xlabel("window start (ticks)")
    ax.set_ylabel("queue length at window end")
    ax.set_title("busiest link queues")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = os.path.join(out_dir, "queue_lengths.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _delay_figure(messages_path: str, out_dir: str) -> str | None:
    issues, delays = [], []
    with open(messages_path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["kind"] != "pub":
                continue
            issue = int(row["issue_tick"])
            issues.append(issue)
            delays.append(int(row["delivery_tick"]) - issue)
    if not delays:
        return None

    fig, ax = plt.subplots(figsize=(9, 5))
    ax.scatter(issues, delays, s=8, alpha=0.6)
    ax.set_xlabel("issue tick")
    ax.set_ylabel("delivery delay (ticks)")
    ax.set_title("notification delivery delay")
    fig.tight_layout()
    path = os.path.join(out_dir, "delivery_delays.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
