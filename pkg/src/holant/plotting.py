"""Report figures written next to the CSV output."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# no timestamps or version strings, so reruns give identical files
_PNG_META = {"Software": None}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)
    return path


def plot_si_sweep(rows: Sequence, path: str | Path) -> Path:
    """Scatter of the measured constant against its ``2 (P_max - 1)`` bound."""
    fig, ax = plt.subplots(figsize=(5, 4))
    for b, marker in ((1, "o"), (2, "s")):
        sel = [r for r in rows if r.b == b]
        if sel:
            ax.scatter([r.bound for r in sel], [r.si_constant for r in sel], marker=marker,
                       s=14, alpha=0.7, label=f"b={b}")
    top = max([r.bound for r in rows] + [1.0])
    ax.plot([0, top], [0, top], color="k", lw=0.8, ls="--", label="y = bound")
    ax.set_xscale("symlog")
    ax.set_yscale("symlog")
    ax.set_xlabel("2 (P_max - 1)")
    ax.set_ylabel("max eigenvalue over pinnings")
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_mixing_profile(profile, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 4))
    ms = [r.m for r in profile.rows]
    ax.plot(ms, [r.steps for r in profile.rows], "o", label="measured")
    grid = [m for m in range(max(2, min(ms)), max(ms) + 1)]
    ax.plot(grid, [profile.c * m * math.log(m) for m in grid], "-", label=f"{profile.c:.3g} m log m")
    ax.plot(grid, [2 * profile.c * m * math.log(m) for m in grid], ":", color="gray", label="2x fit")
    ax.set_xlabel("edges m")
    ax.set_ylabel("steps to TV <= 0.1")
    ax.set_title(profile.family)
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_row_sums(rows: Sequence, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 4))
    families = sorted({r.family for r in rows})
    for fam in families:
        sel = sorted((r for r in rows if r.family == fam), key=lambda r: r.n)
        ax.plot([r.n for r in sel], [r.row_sum for r in sel], "o-", label=fam)
    ax.set_xlabel("path length n")
    ax.set_ylabel("absolute influence row sum of v0v1")
    ax.legend(frameon=False)
    return _save(fig, path)
