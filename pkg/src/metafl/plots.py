"""Figure rendering for the report path: per-run round curves and the
sweep comparison chart, written as PNG files next to the CSV metrics.
"""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Dict, List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read_metrics_csv(path) -> List[Dict]:
    with open(path, newline="") as fh:
        return [row for row in csv.DictReader(fh)]


def render_run_figure(csv_path, out_path=None) -> Path:
    """Accuracy and attack-success curves over rounds for one run."""
    csv_path = Path(csv_path)
    rows = read_metrics_csv(csv_path)
    if not rows:
        raise ValueError(f"no metric rows in {csv_path}")
    rounds = [int(r["round"]) for r in rows]
    acc = [float(r["accuracy"]) for r in rows]
    asr = [float(r["attack_success"]) for r in rows]
    label = f"{rows[0]['mode']}/{rows[0]['rule']}"

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(rounds, acc, label="test accuracy", color="tab:blue")
    ax.plot(rounds, asr, label="attack success", color="tab:red", linestyle="--")
    ax.set_xlabel("round")
    ax.set_ylabel("rate")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(label)
    ax.legend(loc="best")
    ax.grid(alpha=0.3)
    out = Path(out_path) if out_path else csv_path.with_suffix(".png")
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def render_sweep_figure(summary_rows: List[Dict], out_path) -> Path:
    """Final attack success per sweep cell, grouped by scenario, one bar
    per topology/rule combination."""
    ok = [r for r in summary_rows if r.get("status", "ok") == "ok"]
    if not ok:
        raise ValueError("no successful sweep cells to plot")
    scenarios = sorted({r["scenario"] for r in ok})
    series = sorted({(r["topology"], r["rule"]) for r in ok})
    width = 0.8 / max(len(series), 1)

    fig, ax = plt.subplots(figsize=(max(6, 1.6 * len(scenarios)), 4))
    for si, (topo, rule) in enumerate(series):
        xs, ys = [], []
        for xi, sc in enumerate(scenarios):
            cell = [r for r in ok if r["scenario"] == sc
                    and (r["topology"], r["rule"]) == (topo, rule)]
            if cell:
                xs.append(xi + si * width)
                ys.append(float(cell[0]["final_attack_success"]))
        ax.bar(xs, ys, width=width, label=f"{topo}/{rule}")
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(scenarios))])
    ax.set_xticklabels(scenarios)
    ax.set_ylabel("final attack success")
    ax.set_ylim(0, 1.05)
    ax.legend(loc="best", fontsize=8)
    ax.grid(axis="y", alpha=0.3)
    out = Path(out_path)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out
