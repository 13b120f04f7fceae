"""Figures written next to experiment outputs."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import ListedColormap  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}
# PNG metadata without version strings keeps reruns byte-identical
PNG_METADATA = {"Software": None}


def _label_cmap(n):
    base = plt.get_cmap("tab20")
    return ListedColormap([base(i % 20) for i in range(max(n, 1))])


def label_image(m):
    """Labels mapped onto consecutive colour indices."""
    _, dense = np.unique(m.labels, return_inverse=True)
    return dense.reshape(m.shape)


def plot_aoi_map(m, d=None, path=None, title=None, max_points=4000):
    """Draw the AOI map, optionally overlaid with (a subsample of) the gaze points."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4, 4 * m.height / m.width))
        img = label_image(m)
        ax.imshow(img, cmap=_label_cmap(int(img.max()) + 1), interpolation="nearest",
                  extent=(0, m.width, m.height, 0))
        if d is not None and len(d):
            _, xs, ys = d.flat
            if xs.size > max_points:
                keep = np.linspace(0, xs.size - 1, max_points).astype(int)
                xs, ys = xs[keep], ys[keep]
            ax.scatter(xs, ys, s=1, c="k", alpha=0.3, linewidths=0)
        ax.set_xlim(0, m.width)
        ax.set_ylim(m.height, 0)
        ax.set_xlabel("x [px]")
        ax.set_ylabel("y [px]")
        if title:
            ax.set_title(title)
        return _finish(fig, path)


def plot_trace(trace, path=None):
    """Validation metric before/after growth per iteration, accepted steps marked."""
    it = [r.iteration for r in trace]
    old = [100 * r.metric_old for r in trace]
    new = [100 * r.metric_new for r in trace]
    acc = [r.accepted for r in trace]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 2.8))
        ax.plot(it, old, color="0.5", lw=1, label="current AOIs")
        ax.plot(it, new, color="C0", lw=1, label="grown AOIs")
        ax.scatter([i for i, a in zip(it, acc) if a], [v for v, a in zip(new, acc) if a],
                   s=10, color="C0", zorder=3, label="accepted")
        ax.set_xlabel("iteration")
        ax.set_ylabel("validation accuracy [%]")
        ax.legend(frameon=False, loc="lower right")
        return _finish(fig, path)


def plot_report(rows, path=None):
    """Grouped bars of Init and Opti accuracy per report row."""
    labels = [f"{r.adaptation}\n{r.init_method} {r.parameter}" for r in rows]
    init = [100 * r.init_acc for r in rows]
    opti = [100 * r.opti_acc if r.opti_acc is not None else np.nan for r in rows]
    x = np.arange(len(rows))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(4, 1.1 * len(rows) + 1), 3))
        ax.bar(x - 0.2, init, 0.4, color="0.6", label="Init")
        ax.bar(x + 0.2, opti, 0.4, color="C0", label="Opti")
        chance = sorted({100 * r.chance for r in rows})
        for i, c in enumerate(chance):
            ax.axhline(c, color="k", lw=0.8, ls="--", label="chance" if i == 0 else None)
        for xi, r in zip(x, rows):
            if r.best:
                ax.annotate("best", (xi + 0.2, 100 * r.opti_acc), ha="center", va="bottom", fontsize=7)
        ax.set_xticks(x)
        ax.set_xticklabels(labels)
        ax.set_ylabel("balanced accuracy [%]")
        ax.set_ylim(0, 105)
        ax.legend(frameon=False, loc="upper left", ncol=3)
        return _finish(fig, path)


def _finish(fig, path):
    fig.tight_layout()
    if path is not None:
        fig.savefig(path, metadata=PNG_METADATA)
        plt.close(fig)
    return fig
