"""Plot experiment outputs.

    python docs/plot.py out/hypercube_bias
    python docs/plot.py out/norm_ablation
"""
import json
import sys
from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd


def plot_bias(out: Path) -> None:
    trace = pd.read_csv(out / "trace.csv")
    ref = json.loads((out / "summary.json").read_text())["reference_q"]
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, g in trace.groupby("sampler"):
        g = g.assign(err=(g.estimate - ref).abs())
        m = g.groupby("iter").err.mean()
        ax.plot(m.index, m.values, label=name)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("|running mean - reference|")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "bias.png", dpi=150)


def plot_points(out: Path) -> None:
    pts = pd.read_csv(out / "points.csv")
    modes = sorted(pts.norm_mode.unique())
    fig, axes = plt.subplots(1, len(modes), figsize=(5 * len(modes), 5))
    for ax, mode in zip(axes, modes):
        p = pts[pts.norm_mode == mode]
        rej = p[p.involution_rejected == 1]
        ax.scatter(p.x_1, p.x_2, s=1, c="0.8")
        ax.scatter(rej.x_1, rej.x_2, s=4, c="tab:red")
        ax.set_title(f"{mode}: {len(rej)} rejected")
        ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(out / "rejections.png", dpi=150)


if __name__ == "__main__":
    out = Path(sys.argv[1])
    if (out / "points.csv").exists():
        plot_points(out)
    else:
        plot_bias(out)
