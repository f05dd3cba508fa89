"""Figures for CLI results. Each function takes the records a subcommand emits."""

from __future__ import annotations

import os
from collections import defaultdict


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update({
        "figure.dpi": 100,
        "savefig.dpi": 150,
        "axes.grid": True,
        "grid.alpha": 0.3,
        "font.size": 10,
        # fixed metadata keeps files reproducible
        "svg.hashsalt": "noisyloc",
    })
    return plt


def _save(fig, outdir: str, name: str) -> str:
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, name)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None} if path.endswith(".png") else None)
    _pyplot().close(fig)
    return path


def plot_top_probabilities(record: dict, outdir: str) -> str:
    plt = _pyplot()
    top = record["top"]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar([t["bits"] for t in top], [t["prob"] for t in top], color="C0")
    ax.axhline(2.0 ** -record["n"], color="k", lw=0.8, ls="--", label="uniform")
    ax.set_ylabel("probability")
    ax.set_xlabel("bitstring")
    ax.tick_params(axis="x", rotation=60)
    ax.legend()
    return _save(fig, outdir, "simulate_top.png")


def plot_support_statistics(rows: list[dict], outdir: str) -> str:
    plt = _pyplot()
    fig, axes = plt.subplots(1, 2, figsize=(8, 3.5), sharey=True)
    for ax, by in zip(axes, ("support_size", "largest_component")):
        sel = [r for r in rows if r["by"] == by and r["hs_weight"] > 0]
        ax.bar([r["value"] for r in sel], [r["hs_weight"] for r in sel], color="C1")
        ax.set_yscale("log")
        ax.set_xlabel(by.replace("_", " ") + " (blocks)")
    axes[0].set_ylabel("share of sum c_P^2")
    return _save(fig, outdir, "decompose_mass.png")


def plot_markov_gaps(rows: list[dict], outdir: str) -> str:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    by_block = defaultdict(list)
    for r in rows:
        by_block[r["block"]].append((r["ell"], r["gap"]))
    for b, pts in sorted(by_block.items()):
        pts.sort()
        ax.plot([e for e, _ in pts], [max(g, 1e-17) for _, g in pts], marker="o", label=f"block {b}")
    if any(g > 0 for pts in by_block.values() for _, g in pts):
        ax.set_yscale("log")
    ax.set_xlabel("ell")
    ax.set_ylabel("Markov gap")
    if len(by_block) <= 10:
        ax.legend(fontsize=8)
    return _save(fig, outdir, "markov_gap.png")


def plot_critical_depth(rows: list[dict], outdir: str) -> str:
    from .lattice import depth_factor

    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for i, r in enumerate(rows):
        dmax = max(2 * r["critical_depth"], 8)
        ds = list(range(1, dmax + 1))
        ax.plot(ds, [depth_factor(r["p"], d, r["D"]) for d in ds], color=f"C{i % 10}",
                label=f"p={r['p']}, D={r['D']}, c={r['c']:g}")
        ax.axvline(r["critical_depth"], color=f"C{i % 10}", ls=":", lw=0.8)
        ax.axhline(1 / r["c"], color=f"C{i % 10}", ls="--", lw=0.6)
    ax.set_yscale("log")
    ax.set_xlabel("depth d")
    ax.set_ylabel("(1-p)^d (4d)^D")
    ax.legend(fontsize=8)
    return _save(fig, outdir, "critical_depth.png")


def plot_verify_slack(records: list[dict], outdir: str) -> str:
    plt = _pyplot()
    groups = defaultdict(list)
    for r in records:
        if r.get("kind") == "check":
            groups[r["check"]].append(r)
    names = sorted(groups)
    fig, ax = plt.subplots(figsize=(7, 0.45 * len(names) + 1.5))
    for i, name in enumerate(names):
        for r in groups[name]:
            scale = max(abs(r["bound"]), 1e-12)
            rel = r["slack"] / scale
            color = "C2" if r["pass"] else "C3"
            ax.plot(rel, i, marker="|" if r["asserted"] else ".", color=color, ms=8, alpha=0.6)
    ax.set_yticks(range(len(names)))
    ax.set_yticklabels(names, fontsize=8)
    ax.axvline(0, color="k", lw=0.8)
    ax.set_xlabel("slack / |bound|")
    return _save(fig, outdir, "verify_slack.png")
