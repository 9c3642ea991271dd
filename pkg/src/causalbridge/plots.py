"""SVG rendering of :class:`~causalbridge.harness.FigureSpec` objects.

Rendering is deterministic: matplotlib's SVG hash salt and metadata are
pinned so the same report always yields the same bytes.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import ConfigError  # noqa: E402

_RC = {"svg.hashsalt": "causalbridge", "svg.fonttype": "none", "font.size": 9}


def _lines(ax, spec, step=False):
    for s in spec.series:
        if not len(s.get("x", ())):
            continue
        if step:
            ax.step(s["x"], s["y"], where="post", label=s["label"])
        else:
            ax.plot(s["x"], s["y"], marker="o", ms=3, label=s["label"])


def _errorbar(ax, spec):
    labels = [s["label"] for s in spec.series]
    for i, s in enumerate(spec.series):
        y = s["y"]
        if s.get("lo") is not None and s.get("hi") is not None:
            ax.errorbar([i], [y], yerr=[[y - s["lo"]], [s["hi"] - y]], fmt="o", capsize=4)
        else:
            ax.plot([i], [y], "o")
    ax.set_xticks(range(len(labels)), labels)


def _box(ax, spec):
    data = [s["values"] for s in spec.series]
    keep = [i for i, d in enumerate(data) if len(d)]
    if keep:
        ax.boxplot([data[i] for i in keep], positions=keep)
    ax.set_xticks(range(len(data)), [s["label"] for s in spec.series])


def _heatmap(ax, fig, spec):
    xl, yl, vals = spec.grid
    v = np.asarray(vals, dtype=float)
    im = ax.imshow(v, origin="lower", aspect="auto", cmap="viridis")
    ax.set_xticks(range(len(xl)), xl)
    ax.set_yticks(range(len(yl)), yl)
    for (i, j), val in np.ndenumerate(v):
        ax.text(j, i, f"{val:.3g}", ha="center", va="center", fontsize=7, color="w")
    fig.colorbar(im, ax=ax)


def render(spec, path, note=None):
    """Write one figure to ``path`` (SVG); ``note`` goes into the SVG description."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        if spec.kind in ("lines", "steps"):
            _lines(ax, spec, step=spec.kind == "steps")
        elif spec.kind == "errorbar":
            _errorbar(ax, spec)
        elif spec.kind == "box":
            _box(ax, spec)
        elif spec.kind == "heatmap":
            if spec.grid is None:
                raise ConfigError(f"heatmap {spec.name} has no grid")
            _heatmap(ax, fig, spec)
        else:
            plt.close(fig)
            raise ConfigError(f"unknown figure kind {spec.kind!r}")
        for y, label in spec.hlines:
            ax.axhline(y, ls="--", lw=0.8, color="0.4", label=label)
        if spec.logx:
            ax.set_xscale("log")
        if spec.logy and spec.kind != "heatmap":
            ax.set_yscale("log")
        ax.set_title(spec.title)
        ax.set_xlabel(spec.xlabel)
        ax.set_ylabel(spec.ylabel)
        if spec.kind in ("lines", "steps") or spec.hlines:
            handles, _ = ax.get_legend_handles_labels()
            if handles:
                ax.legend(fontsize=7)
        fig.tight_layout()
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None, "Description": note})
        plt.close(fig)
    return path


def emit_plots(report, out_dir=None):
    out = Path(out_dir) if out_dir is not None else report.config.output_dir()
    note = f"config_hash={report.config.hash}"
    return [render(spec, out / f"{spec.name}.svg", note) for spec in report.figures]
