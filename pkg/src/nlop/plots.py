"""Static SVG figures with reproducible bytes (fixed hash salt, no date stamp)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["polar", "loglog", "polylines", "lines"]

_RC = {"svg.hashsalt": "nlop", "svg.fonttype": "none", "figure.figsize": (5.0, 4.0), "font.size": 9}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def polar(path, series: dict, title: str = "") -> Path:
    """series: label -> (angles, values)."""
    with plt.rc_context(_RC):
        fig = plt.figure()
        ax = fig.add_subplot(projection="polar")
        for label, (ang, val) in series.items():
            ang = np.append(ang, ang[0])
            val = np.append(val, val[0])
            ax.plot(ang, val, label=label, lw=1.2)
        ax.set_title(title)
        ax.legend(loc="lower left", bbox_to_anchor=(-0.1, -0.15), fontsize=7)
        return _save(fig, path)


def loglog(path, series: dict, fits: dict | None = None, xlabel: str = "", ylabel: str = "",
           title: str = "") -> Path:
    """series: label -> (x, y) markers; fits: label -> (slope, intercept) drawn as lines."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for label, (x, y) in series.items():
            ax.loglog(x, y, "o", label=label, ms=4)
            if fits and label in fits:
                k, b = fits[label]
                xs = np.geomspace(min(x), max(x), 32)
                ax.loglog(xs, np.exp(b) * xs**k, "-", lw=1, label=f"slope {k:.3f}")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        ax.legend(fontsize=7)
        return _save(fig, path)


def lines(path, series: dict, xlabel: str = "", ylabel: str = "", title: str = "", logx: bool = False,
          logy: bool = False) -> Path:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for label, (x, y) in series.items():
            ax.plot(x, y, "o-", label=label, ms=4, lw=1)
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        ax.legend(fontsize=7)
        return _save(fig, path)


def polylines(path, curves: dict, box=None, title: str = "") -> Path:
    """curves: label -> (k, 2) points drawn as markers; box: ((lo), (hi)) outline."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        if box is not None:
            (x0, y0), (x1, y1) = box
            ax.plot([x0, x1, x1, x0, x0], [y0, y0, y1, y1, y0], "k:", lw=0.8)
        for label, pts in curves.items():
            pts = np.asarray(pts)
            if len(pts):
                ax.plot(pts[:, 0], pts[:, 1], ".", ms=2, label=label)
        ax.set_aspect("equal")
        ax.set_title(title)
        ax.legend(fontsize=7)
        return _save(fig, path)
