"""Static figures for experiment reports (SVG via matplotlib's Agg backend)."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "svg.hashsalt": "axon",
    "svg.fonttype": "none",
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.5,
}
METHOD_STYLE = {
    "axon": dict(color="C0", marker="o"),
    "baseline": dict(color="C3", marker="s"),
    "yarotsky": dict(color="C2", marker="^"),
}


def _save(fig, path):
    # no timestamp, so identical data gives identical bytes
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_errors(rows, path, title=""):
    """Log-scale relative error against K, one line per method.

    ``rows`` are ``(method, K, rel_l2)`` tuples.
    """
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 4))
        for method in dict.fromkeys(r[0] for r in rows):
            pts = sorted((k, e) for m, k, e in rows if m == method and e > 0)
            if not pts:
                continue
            ks, es = zip(*pts)
            ax.semilogy(ks, es, label=method, markersize=4, **METHOD_STYLE.get(method, {}))
        ax.set_xlabel("number of neurons K")
        ax.set_ylabel("relative L2 error")
        if title:
            ax.set_title(title)
        ax.legend()
        fig.tight_layout()
        _save(fig, path)


def plot_basis(X, Phi, path, title=""):
    """Basis functions on a grid: line plots in 1D, colour maps in 2D."""
    X = np.asarray(X, dtype=float)
    nb = Phi.shape[1]
    if nb == 0:
        return
    with plt.rc_context(STYLE):
        if X.shape[1] == 1:
            fig, ax = plt.subplots(figsize=(6, 4))
            for j in range(nb):
                ax.plot(X[:, 0], Phi[:, j], label=f"phi_{j + 1}")
            ax.set_xlabel("x")
            ax.legend(fontsize=8)
        else:
            side = int(round(np.sqrt(X.shape[0])))
            cols = min(3, nb)
            rows = -(-nb // cols)
            fig, axes = plt.subplots(rows, cols, figsize=(3 * cols, 2.8 * rows), squeeze=False)
            extent = [X[:, 0].min(), X[:, 0].max(), X[:, 1].min(), X[:, 1].max()]
            for j, ax in enumerate(axes.flat):
                if j >= nb:
                    ax.axis("off")
                    continue
                img = Phi[:, j].reshape(side, side).T
                ax.imshow(img, origin="lower", extent=extent, aspect="equal")
                ax.set_title(f"phi_{j + 1}", fontsize=9)
                ax.grid(False)
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        _save(fig, path)


def plot_yarotsky(rows, path):
    """Measured max error of f_m next to the 2^(-2m-2) bound."""
    ms = [r[0] for r in rows]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.semilogy(ms, [r[1] for r in rows], "k--", label="bound 2^(-2m-2)")
        ax.semilogy(ms, [r[2] for r in rows], "o", color="C2", label="max error on grid")
        ax.set_xlabel("depth m")
        ax.set_ylabel("max |x^2 - f_m(x)|")
        ax.legend()
        fig.tight_layout()
        _save(fig, path)
