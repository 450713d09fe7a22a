"""Matplotlib rendering of convergence charts next to the delimited reports."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _plot_curves(ax, curves, xlabel, ylabel, xlog):
    for label, x, y in curves:
        pairs = [(a, b) for a, b in zip(x, y) if b > 0]
        if not pairs:
            continue
        xs, ys = zip(*pairs)
        ax.plot(xs, ys, marker="o", markersize=3, linewidth=1.2, label=label)
    ax.set_yscale("log")
    if xlog:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)


def line_chart(curves, path, xlabel="N", ylabel="error", title=None, xlog=False):
    """Log-scale convergence chart; curves = [(label, x, y), ...]."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    _plot_curves(ax, curves, xlabel, ylabel, xlog)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def compare_chart(by_dim, by_iter, path, title=None):
    """Two-panel overlay: error against subspace dimension and iteration."""
    fig, axes = plt.subplots(1, 2, figsize=(10.5, 4.2))
    _plot_curves(axes[0], by_dim, "subspace dimension N", "error", xlog=False)
    _plot_curves(axes[1], by_iter, "iteration n", "error", xlog=False)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
