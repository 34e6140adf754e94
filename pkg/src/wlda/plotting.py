"""Static SVG figures: heatmaps, bar charts and accuracy curves.

Output is byte-stable for identical input: the SVG id salt is fixed, the
creation date is dropped and text is kept as ``<text>`` elements.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "svg.hashsalt": "wlda",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.titlesize": 10,
    "figure.dpi": 100,
}


def _check_finite(a: np.ndarray):
    if not np.all(np.isfinite(a)):
        raise ValueError("figure data must be finite")


def _save(fig, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    except OSError as exc:
        raise OSError(f"cannot write figure to {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path


def _fmt(v: float) -> str:
    # avoid "-0.00"
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def emit_heatmap(
    matrix,
    labels: Sequence[str],
    path,
    title: str = "",
    kind: str = "auto",
) -> Path:
    """Annotated heatmap.

    ``kind`` is ``"correlation"`` (fixed range [-1, 1]), ``"signed"``
    (symmetric data range), ``"nonneg"`` (sequential scale from 0) or
    ``"auto"`` (nonneg when no entry is negative, else signed).
    """
    M = np.asarray(matrix, dtype=float)
    _check_finite(M)
    if kind == "auto":
        kind = "nonneg" if np.all(M >= 0) else "signed"
    if kind == "correlation":
        cmap, vmin, vmax = "RdBu_r", -1.0, 1.0
    elif kind == "signed":
        lim = float(np.abs(M).max()) or 1.0
        cmap, vmin, vmax = "RdBu_r", -lim, lim
    elif kind == "nonneg":
        cmap, vmin, vmax = "Reds", 0.0, float(M.max()) or 1.0
    else:
        raise ValueError(f"unknown heatmap kind {kind!r}")

    with plt.rc_context(RC):
        n_rows, n_cols = M.shape
        fig, ax = plt.subplots(figsize=(1.0 + 0.9 * n_cols, 0.6 + 0.8 * n_rows))
        im = ax.imshow(M, cmap=cmap, vmin=vmin, vmax=vmax)
        ax.set_xticks(range(n_cols), labels=list(labels)[:n_cols], rotation=45, ha="right")
        row_labels = list(labels) if n_rows == len(labels) else [str(i) for i in range(n_rows)]
        ax.set_yticks(range(n_rows), labels=row_labels)
        mid = 0.5 * (vmin + vmax)
        span = vmax - vmin
        for i in range(n_rows):
            for j in range(n_cols):
                dark = abs(M[i, j] - mid) > 0.35 * span if kind != "nonneg" else M[i, j] > vmin + 0.6 * span
                ax.text(j, i, _fmt(M[i, j]), ha="center", va="center", color="white" if dark else "black")
        fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
        if title:
            ax.set_title(title)
        return _save(fig, path)


def emit_bars(values, labels: Sequence[str], path, title: str = "", series: Optional[Sequence[str]] = None) -> Path:
    """Horizontal bars; a 2-D ``values`` gives one group of bars per row (``series``)."""
    V = np.atleast_2d(np.asarray(values, dtype=float))
    _check_finite(V)
    names = list(series) if series is not None else [""] * V.shape[0]
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5.0, 0.6 + 0.45 * V.shape[1] * max(1, V.shape[0]) ** 0.5))
        height = 0.8 / V.shape[0]
        y = np.arange(V.shape[1])
        for k, row in enumerate(V):
            ax.barh(y + k * height - 0.4 + height / 2, row, height=height, label=names[k] or None)
        ax.set_yticks(y, labels=list(labels))
        ax.invert_yaxis()
        if any(names):
            ax.legend(frameon=False)
        if title:
            ax.set_title(title)
        return _save(fig, path)


def emit_accuracy_curves(rates: Sequence[float], curves: Mapping[str, tuple], path, title: str = "") -> Path:
    """``curves`` maps method name to (means, stds) aligned with ``rates``."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        for name, (means, stds) in curves.items():
            means, stds = np.asarray(means, dtype=float), np.asarray(stds, dtype=float)
            ok = np.isfinite(means)
            ax.errorbar(np.asarray(rates)[ok], means[ok], yerr=np.nan_to_num(stds[ok]), marker="o", capsize=3, label=name)
        ax.set_xlabel("missing rate")
        ax.set_ylabel("accuracy")
        ax.legend(frameon=False)
        if title:
            ax.set_title(title)
        return _save(fig, path)
