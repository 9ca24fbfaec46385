"""Figure rendering for the CLI's ``--plot`` flag (file output only, Agg backend)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_KIND_COLORS = {"coupling": "tab:red", "decoupling": "tab:gray"}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_spectrum(nu, g, path: Path, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(nu, g, color="tab:blue")
    ax.set_xlabel(r"$\nu$")
    ax.set_ylabel(r"$G(\nu)$")
    ax.set_title(title)
    return _save(fig, path)


def plot_overlap(nu, g, kernel, path: Path, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.fill_between(nu, g, color="tab:blue", alpha=0.4, label=r"$G(\nu)$")
    ax.plot(nu, kernel / max(np.max(np.abs(kernel)), 1e-300) * max(np.max(g), 1e-300),
            color="tab:red", lw=1, label="sinc kernel (rescaled)")
    ax.set_xlabel(r"$\nu$")
    ax.legend(frameon=False, fontsize=8)
    ax.set_title(title)
    return _save(fig, path)


def plot_trajectory(time, p1, kinds, path: Path, title: str = "") -> Path:
    time, p1, kinds = np.asarray(time), np.asarray(p1), np.asarray(kinds)
    fig, ax = plt.subplots(figsize=(5.5, 3.2))
    ax.plot(time, p1, color="black", lw=0.8)
    for kind, color in _KIND_COLORS.items():
        sel = kinds == kind
        ax.scatter(time[sel], p1[sel], s=4, color=color, label=kind)
    ax.set_xlabel("t")
    ax.set_ylabel(r"$p_1$")
    ax.legend(frameon=False, fontsize=8)
    ax.set_title(title)
    return _save(fig, path)


def plot_sweep(tau_cp, qa_ratio, path: Path, ylabel: str = "QA ratio", title: str = "") -> Path:
    tau_cp = np.asarray(tau_cp, dtype=float)
    ratio = np.array([np.nan if r is None else r for r in qa_ratio], dtype=float)
    fig, ax = plt.subplots(figsize=(5.5, 3.2))
    ax.plot(tau_cp, ratio, marker="o", ms=2.5, lw=0.8, color="tab:purple")
    ax.axhline(1.0, color="black", lw=0.8)
    ax.fill_between(tau_cp, 1.0, ratio, where=ratio > 1, color="tab:purple", alpha=0.25)
    ax.set_xlabel(r"$\tau_{cp}$")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    return _save(fig, path)
