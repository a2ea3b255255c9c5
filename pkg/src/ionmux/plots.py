"""Figure rendering for the report path.

Each subcommand's delimited output has a matching matplotlib rendering;
figures are written next to the data files.  Styling stays close to
matplotlib defaults; callers only get PNGs on request.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_branching_ratio(pulses: Sequence[int], br: Sequence[float],
                         strategy: str, path) -> Path:
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.plot(pulses, br, "o-", ms=3, label=strategy)
    ax.set_xlabel("number of excitation pulses")
    ax.set_ylabel("effective branching ratio")
    ax.set_ylim(0, 0.6)
    ax.legend()
    ax.grid(alpha=0.3)
    return _save(fig, Path(path))


def plot_enhancement(n: Sequence[int], m: Sequence[float], n_half: float,
                     path, extra: Mapping[str, Sequence[float]] = None) -> Path:
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.plot(n, m, "-", label="M")
    for label, series in (extra or {}).items():
        ax.plot(n, series, "--", label=label)
    if n_half and n_half != float("inf") and n_half <= max(n):
        ax.axvline(n_half, color="gray", ls=":", lw=1,
                   label=r"50% duty cycle")
    ax.set_xlabel("mode count N")
    ax.set_ylabel("multiplexing enhancement")
    ax.legend()
    ax.grid(alpha=0.3)
    return _save(fig, Path(path))


def plot_mode_profile(modes: Sequence[int], probs: Sequence[float],
                      scenario: str, path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(modes, probs, width=0.8)
    ax.set_xlabel("time-bin mode")
    ax.set_ylabel("success probability")
    ax.set_title(scenario)
    return _save(fig, Path(path))


def plot_frontier(pumps: Sequence[int], values: Sequence[float],
                  objective: str, path) -> Path:
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.plot(pumps, values, "s-", ms=4)
    ax.set_xlabel("number of intermediate pumpings")
    ax.set_ylabel(objective)
    ax.grid(alpha=0.3)
    return _save(fig, Path(path))
