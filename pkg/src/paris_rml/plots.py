"""Figure rendering for the report path (learning trajectories, scaling).

Figures are written next to the delimited outputs they illustrate; the
Agg backend keeps everything headless.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

PARAM_LABELS = {
    "phi": r"$\phi$",
    "sigma2": r"$\sigma^2$",
    "beta2": r"$\beta^2$",
}


def save_trajectory_figure(trajectories, path, theta_star=None, title=None):
    """Overlay replicate learning trajectories, one panel per parameter.

    ``trajectories`` maps a replicate label to a column dict as returned
    by ``dataio.read_trajectory_csv``.
    """
    names = ("phi", "sigma2", "beta2")
    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(7.0, 7.5))
    for ax, name in zip(axes, names):
        for label, cols in sorted(trajectories.items()):
            ax.plot(cols["t"], cols[name], lw=0.8, alpha=0.8, label=str(label))
        if theta_star is not None:
            ax.axhline(theta_star[names.index(name)], color="k", ls="--", lw=1.0)
        ax.set_ylabel(PARAM_LABELS[name])
        ax.grid(True, alpha=0.3)
    axes[-1].set_xlabel("t")
    if title:
        axes[0].set_title(title)
    if len(trajectories) <= 8:
        axes[0].legend(fontsize=7, ncol=4, loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def save_benchmark_figure(report, path):
    """Log-log wall time per update against particle count, with fitted slopes."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for algorithm in sorted({p.algorithm for p in report.points}):
        ns, times = report.grid(algorithm)
        slope = report.exponents.get(algorithm)
        label = f"{algorithm} (slope {slope:.2f})" if slope is not None else algorithm
        ax.loglog(ns, times, "o-", label=label)
    ax.set_xlabel("particles N")
    ax.set_ylabel("seconds per update (median)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)
