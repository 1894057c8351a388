"""Report figures written next to the text/JSON/CSV outputs.

All figures are rendered with the Agg backend and saved without a
``Software`` PNG tag, so identical inputs give identical files.
"""
from __future__ import annotations

import os
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .evaluation import EvalReport  # noqa: E402
from .labeling import ClassBounds, PowerClass  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.dpi": 100,
    "savefig.bbox": "tight",
}
CLASS_COLORS = ("tab:blue", "tab:red", "tab:green", "tab:purple")


def _save(fig, path: str | os.PathLike) -> None:
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def plot_confusion(report: EvalReport, path: str | os.PathLike) -> None:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 3.8))
        cm = report.confusion
        ax.imshow(cm, cmap="Blues", vmin=0)
        threshold = cm.max() / 2 if cm.max() else 1
        for (i, j), v in np.ndenumerate(cm):
            ax.text(j, i, str(int(v)), ha="center", va="center",
                    color="white" if v > threshold else "black")
        ticks = range(cm.shape[0])
        ax.set_xticks(ticks, [str(c) for c in range(1, cm.shape[0] + 1)])
        ax.set_yticks(ticks, [str(c) for c in range(1, cm.shape[0] + 1)])
        ax.set_xlabel("predicted class")
        ax.set_ylabel("true class")
        ax.set_title(f"{report.name or 'confusion matrix'}\naccuracy {100 * report.accuracy:.1f}%")
        _save(fig, path)


def plot_training_curve(history: Sequence[float], path: str | os.PathLike,
                        goal_error: float | None = None) -> None:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.8, 3.2))
        ax.semilogy(np.arange(1, len(history) + 1), history, lw=1.2, label="training MSE")
        if goal_error is not None:
            ax.axhline(goal_error, color="k", ls="--", lw=0.8, label="goal")
        ax.set_xlabel("epoch")
        ax.set_ylabel("mean squared error")
        ax.legend(frameon=False)
        _save(fig, path)


def plot_power_classes(timestamps_s: Sequence[float], watts: Sequence[float], bounds: ClassBounds,
                       path: str | os.PathLike) -> None:
    """Power samples coloured by class, with the interval cut lines."""
    t = np.asarray(timestamps_s, dtype=float)
    w = np.asarray(watts, dtype=float)
    edges = (-np.inf, bounds.cut1, bounds.cut2, bounds.cut3, np.inf)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6.0, 3.2))
        for c in PowerClass:
            lo, hi = edges[c - 1], edges[c]
            mask = (w >= lo) & (w < hi) if c < 4 else w >= lo
            ax.plot(t[mask] / 60, w[mask], ".", ms=3, color=CLASS_COLORS[c - 1],
                    label=f"{c}: {c.label} ({int(mask.sum())})")
        for cut in bounds.cuts:
            ax.axhline(cut, color="0.3", lw=0.8)
        ax.set_xlabel("time (min)")
        ax.set_ylabel("power (W)")
        ax.legend(frameon=False, loc="upper left", bbox_to_anchor=(1.0, 1.0))
        _save(fig, path)


def plot_feature_vector(freqs_hz: Sequence[float], values: Sequence[float],
                        path: str | os.PathLike, title: str = "") -> None:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.4, 3.0))
        if len(values) > 200:
            ax.plot(freqs_hz, values, lw=0.6)
        else:
            ax.stem(freqs_hz, values, basefmt=" ")
        ax.set_xlabel("frequency (Hz)")
        ax.set_ylabel("|X_k|")
        if title:
            ax.set_title(title)
        _save(fig, path)


def plot_accuracy_grid(reports: Sequence[EvalReport], path: str | os.PathLike) -> None:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.6, 2.8))
        names = [r.name for r in reports]
        acc = [100 * r.accuracy for r in reports]
        ax.barh(range(len(reports)), acc, color="0.55")
        for i, a in enumerate(acc):
            ax.text(a + 1, i, f"{a:.0f}%", va="center")
        ax.set_yticks(range(len(reports)), names)
        ax.invert_yaxis()
        ax.set_xlim(0, 110)
        ax.set_xlabel("test accuracy (%)")
        _save(fig, path)
