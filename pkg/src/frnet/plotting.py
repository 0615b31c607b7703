"""Figures for simulation-study reports, rendered headless to image files."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FAMILY_STYLE = {"FRN": ("black", 0.0), "BINARY": ("tab:red", -0.22), "CENSORED_BINARY": ("tab:blue", 0.22),
                "RANK": ("tab:green", 0.11)}
RC = {"font.size": 9, "axes.labelsize": 9, "legend.fontsize": 8, "xtick.labelsize": 8, "ytick.labelsize": 8,
      "axes.spines.top": False, "axes.spines.right": False}


def plot_intervals(rows, path, parameters=None):
    """Posterior 95% intervals and medians per dataset, one panel per coefficient.

    ``rows`` are dicts with keys dataset, family, parameter, q025, q50, q975
    and optionally truth.
    """
    params = parameters or sorted({r["parameter"] for r in rows})
    datasets = sorted({r["dataset"] for r in rows})
    pos = {d: k for k, d in enumerate(datasets)}
    families = [f for f in FAMILY_STYLE if any(r["family"] == f for r in rows)]
    with plt.rc_context(RC):
        fig, axes = plt.subplots(len(params), 1, figsize=(6.5, 1.7 * len(params) + 0.4), sharex=True, squeeze=False)
        for ax, name in zip(axes[:, 0], params):
            sel = [r for r in rows if r["parameter"] == name]
            for fam in families:
                color, shift = FAMILY_STYLE[fam]
                pts = [r for r in sel if r["family"] == fam]
                x = np.array([pos[r["dataset"]] for r in pts]) + shift
                ax.vlines(x, [r["q025"] for r in pts], [r["q975"] for r in pts], color=color, lw=1.2, label=fam)
                ax.plot(x, [r["q50"] for r in pts], "o", ms=2.5, color=color)
            truth = [r.get("truth") for r in sel if r.get("truth") is not None]
            if truth and np.isfinite(truth[0]):
                ax.axhline(truth[0], color="gray", ls="--", lw=0.8)
            ax.set_ylabel(name)
        axes[0, 0].legend(ncol=len(families), loc="lower left", bbox_to_anchor=(0, 1.0), frameon=False)
        axes[-1, 0].set_xticks(range(len(datasets)))
        axes[-1, 0].set_xticklabels(datasets, rotation=60, ha="right")
        fig.tight_layout()
        fig.savefig(path, dpi=150)
        plt.close(fig)
    return Path(path)


def plot_concentration(rows, path):
    """Average concentration ratio against the nomination limit, one line per coefficient.

    ``rows`` are dicts with keys m, parameter, ratio.
    """
    params = sorted({r["parameter"] for r in rows})
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        for name in params:
            pts = sorted((r["m"], r["ratio"]) for r in rows if r["parameter"] == name)
            ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-", ms=3, label=name)
        ax.axhline(1.0, color="gray", ls="--", lw=0.8)
        ax.set_xlabel("m")
        ax.set_ylabel("E[(b - b*)^2 | F] / E[(b - b*)^2 | C]")
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path, dpi=150)
        plt.close(fig)
    return Path(path)
