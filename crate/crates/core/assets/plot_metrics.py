#!/usr/bin/env python3
"""Plot a metrics.csv (or sweep.csv) written by aeroswarm.

usage: python3 plot_metrics.py [metrics.csv] [--out DIR] [--smooth N]
"""
import argparse
import os
import re

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

COLORS = {"gmappo": "tab:blue", "kmeans": "tab:green", "random": "tab:gray"}
STYLES = {"gmappo": "-", "kmeans": "--", "random": ":"}


def read_sweep(path):
    frames, users, rows, header = [], None, [], None
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if header is None:
                header = line.split(",")
                continue
            m = re.match(r"# users = (\d+)", line)
            if m:
                if rows:
                    frames.append(pd.DataFrame(rows, columns=header).assign(users=users))
                users, rows = int(m.group(1)), []
            elif line:
                rows.append(line.split(","))
    if rows:
        frames.append(pd.DataFrame(rows, columns=header).assign(users=users))
    df = pd.concat(frames, ignore_index=True)
    for c in header:
        if c not in ("phase", "policy"):
            df[c] = pd.to_numeric(df[c])
    return df


def phase_edges(df):
    g = df[df.policy == "gmappo"].sort_values("episode")
    changed = g.phase.ne(g.phase.shift())
    return list(g.episode[changed].iloc[1:])


def curves(df, out, smooth):
    panels = [
        ("total_reward", "episode reward"),
        ("coverage", "coverage"),
        ("throughput_mbps", "throughput (Mbps)"),
        ("jain_rate", "rate fairness"),
        ("load_jfi", "load fairness"),
        ("min_rate_mbps", "min rate (Mbps)"),
    ]
    fig, axes = plt.subplots(3, 2, figsize=(12, 11), sharex=True)
    edges = phase_edges(df)
    for ax, (col, label) in zip(axes.flat, panels):
        for tag, g in df.groupby("policy"):
            g = g.sort_values("episode")
            y = g[col].rolling(smooth, min_periods=1).mean()
            ax.plot(g.episode, y, STYLES.get(tag, "-"), color=COLORS.get(tag), label=tag)
            if col == "total_reward":
                sd = g.reward_variance_window.clip(lower=0) ** 0.5
                ax.fill_between(g.episode, y - sd, y + sd, color=COLORS.get(tag), alpha=0.15)
        for e in edges:
            ax.axvline(e, color="k", lw=0.8, alpha=0.5)
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
    axes[0, 0].legend()
    for ax in axes[-1]:
        ax.set_xlabel("episode")
    fig.tight_layout()
    fig.savefig(os.path.join(out, "training_curves.png"), dpi=130)


def sweep(df, out):
    tail = df[df.episode >= df.episode.max() * 0.8]
    agg = tail.groupby(["users", "policy"]).coverage.mean().unstack()
    fig, ax = plt.subplots(figsize=(6, 4))
    for tag in agg.columns:
        ax.plot(agg.index, agg[tag], "o" + STYLES.get(tag, "-"), color=COLORS.get(tag), label=tag)
    ax.set_xlabel("users M")
    ax.set_ylabel("coverage (last 20% of episodes)")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(os.path.join(out, "sweep_coverage.png"), dpi=130)


def main():
    p = argparse.ArgumentParser()
    p.add_argument("csv", nargs="?", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--smooth", type=int, default=25)
    a = p.parse_args()
    here = os.path.dirname(os.path.abspath(__file__))
    path = a.csv
    if path is None:
        path = os.path.join(here, "sweep.csv")
        if not os.path.exists(path):
            path = os.path.join(here, "metrics.csv")
    out = a.out or os.path.dirname(os.path.abspath(path))
    with open(path) as fh:
        fh.readline()
        is_sweep = fh.readline().startswith("# users")
    if is_sweep:
        df = read_sweep(path)
        sweep(df, out)
    else:
        df = pd.read_csv(path, comment="#")
        curves(df, out, a.smooth)
    print("plots written to", out)


if __name__ == "__main__":
    main()
