"""Figure rendering for the report paths.

Each CLI report command can drop a PNG next to its delimited output; these
helpers own the matplotlib usage so library code stays plot-free.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_decay_figure(rows, path, title="Spectrum decay under ball averaging"):
    """Log-log magnitude-vs-frequency plot, raw and averaged."""
    norms = [r.omega_norm for r in rows]
    raw = [r.spectrum_mag for r in rows]
    avg = [r.averaged_mag for r in rows]
    fig, ax = plt.subplots(figsize=(7, 5))
    ax.loglog(norms, raw, "o-", label="|F|", markersize=4)
    ax.loglog(norms, avg, "s-", label="|F| x multiplier", markersize=4)
    ax.set_xlabel("|omega|")
    ax.set_ylabel("magnitude")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_sweep_figure(rows, path, title="Defence sweep"):
    """Defence rate and accuracies against the swept radius, per attack/sampler."""
    fig, ax = plt.subplots(figsize=(7, 5))
    groups = {}
    for r in rows:
        groups.setdefault((r.attack, r.sampler, r.directions), []).append(r)
    for (attack, sampler, k), grp in sorted(groups.items()):
        grp = sorted(grp, key=lambda r: r.radius)
        radii = [g.radius for g in grp]
        rates = [g.defence_rate if g.defence_rate is not None else np.nan for g in grp]
        ax.plot(radii, rates, "o-", label=f"{attack}/{sampler} K={k}")
    ax.set_xlabel("radius")
    ax.set_ylabel("defence rate")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
