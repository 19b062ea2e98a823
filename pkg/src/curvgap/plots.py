"""Static SVG summary plots.

Output is deterministic: a fixed hash salt for element ids and no embedded
creation date, so identical inputs give identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "curvgap"

import matplotlib.pyplot as plt

_SAVE = {"format": "svg", "metadata": {"Date": None}}


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)
    return path


def margin_curves(records_by_check: dict, ts: list, path):
    """Worst audit margin against t, one line per check family.

    ``records_by_check`` maps a family name to a list of per-sample margins
    (None where a record was vacuous); ``ts`` gives the sample parameters.
    """
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for name in sorted(records_by_check):
        margins = records_by_check[name]
        pts = [(t, m) for t, m in zip(ts, margins) if m is not None]
        if not pts:
            continue
        ax.plot([p[0] for p in pts], [p[1] for p in pts],
                marker="o", markersize=3, linewidth=1.2, label=name)
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("margin (negative = violated)")
    ax.set_title("audit margins along the path")
    ax.legend(fontsize=7, loc="best")
    ax.invert_xaxis()
    return _finish(fig, path)


def sup_u_curves(ts: list, sup_u: list, bounds: list, path):
    """sup u_t against its a priori upper bound."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(ts, sup_u, marker="o", markersize=3, linewidth=1.2,
            label="sup u_t")
    pts = [(t, b) for t, b in zip(ts, bounds) if b is not None]
    if pts:
        ax.plot([p[0] for p in pts], [p[1] for p in pts],
                marker="s", markersize=3, linewidth=1.2, linestyle="--",
                label="upper bound")
    ax.set_xlabel("t")
    ax.set_ylabel("value")
    ax.set_title("potential sup versus bound")
    ax.legend(fontsize=8)
    ax.invert_xaxis()
    return _finish(fig, path)


def path_diagnostics(ts: list, diagnostics: list, path):
    """Residuals and metric-eigenvalue floor along the path."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.8, 3.6))
    ax1.semilogy(ts, [max(d["residual"], 1e-18) for d in diagnostics],
                 marker="o", markersize=3, linewidth=1.2)
    ax1.set_xlabel("t")
    ax1.set_ylabel("final Newton residual")
    ax1.invert_xaxis()
    ax2.plot(ts, [d["min_eig"] for d in diagnostics],
             marker="o", markersize=3, linewidth=1.2)
    ax2.set_xlabel("t")
    ax2.set_ylabel("min relative eigenvalue")
    ax2.invert_xaxis()
    return _finish(fig, path)


__all__ = ["margin_curves", "sup_u_curves", "path_diagnostics"]
