"""SVG figures for grid sweeps and population comparisons."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .eval import GridResult, PopulationStats, cut  # noqa: E402

STYLE = {
    "svg.hashsalt": "churnlag",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}

AXIS_LABEL = {"downsample": "resample window (days)", "moving_average": "moving-average window L (days)"}


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches=None)
    plt.close(fig)


def accuracy_surface(result: GridResult, family: str):
    """Mean accuracy matrix with rows = resample values, columns = lags."""
    cells = [c for c in result.cells if c.family == family]
    values = sorted({c.value for c in cells})
    lags = sorted({c.lag for c in cells})
    surface = np.full((len(values), len(lags)), np.nan)
    for c in cells:
        surface[values.index(c.value), lags.index(c.lag)] = c.mean
    return values, lags, surface


def heatmap_figsize(n_values: int, n_lags: int) -> tuple[float, float]:
    return 2.5 + 0.12 * n_lags, 1.5 + 0.15 * n_values


def plot_heatmap(result: GridResult, family: str, path, mode: str = "downsample") -> None:
    values, lags, surface = accuracy_surface(result, family)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=heatmap_figsize(len(values), len(lags)))
        mesh = ax.imshow(surface, origin="lower", aspect="auto", cmap="viridis", interpolation="nearest")
        ax.set_xticks(range(len(lags)))
        ax.set_xticklabels([str(n) for n in lags], rotation=90)
        ax.set_yticks(range(len(values)))
        ax.set_yticklabels([str(v) for v in values])
        # thin out crowded tick labels
        for labels in (ax.get_xticklabels(), ax.get_yticklabels()):
            step = max(1, len(labels) // 20)
            for i, lab in enumerate(labels):
                lab.set_visible(i % step == 0)
        ax.set_xlabel("lag n (days)")
        ax.set_ylabel(AXIS_LABEL.get(mode, "resample"))
        ax.set_title(f"{family}: mean CV accuracy")
        fig.colorbar(mesh, ax=ax, label="accuracy")
        fig.tight_layout()
        _save(fig, path)


def plot_cut_by_value(result: GridResult, family: str, lags, path, mode: str = "downsample") -> None:
    """Accuracy against resample value, one line per fixed lag."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        for n in lags:
            xs, means, stds = cut(result, family, lag=n)
            if len(xs):
                ax.errorbar(xs, means, yerr=np.nan_to_num(stds), marker="o", ms=3, capsize=2, label=f"n={n}")
        ax.set_xlabel(AXIS_LABEL.get(mode, "resample"))
        ax.set_ylabel("mean CV accuracy")
        ax.set_title(f"{family}: accuracy vs resampling")
        ax.legend(frameon=False)
        fig.tight_layout()
        _save(fig, path)


def plot_cut_by_lag(result: GridResult, value: int, path, families=None) -> None:
    """Accuracy against lag at a fixed resample value, one line per family."""
    families = families or sorted({c.family for c in result.cells})
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        for family in families:
            xs, means, _ = cut(result, family, value=value)
            if len(xs):
                ax.plot(xs, means, marker="o", ms=3, label=family)
        ax.set_xlabel("lag n (days)")
        ax.set_ylabel("mean CV accuracy")
        ax.set_title(f"accuracy vs lag at resample={value}")
        ax.legend(frameon=False)
        fig.tight_layout()
        _save(fig, path)


def plot_populations(stats: PopulationStats, path) -> None:
    edges = stats.bin_edges
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.5, 3.5))
        ax.stairs(stats.active_histogram, edges, label="active", color="tab:blue")
        ax.stairs(stats.inactive_histogram, edges, label="inactive", color="tab:orange")
        ax.axvline(stats.active_median, color="tab:blue", ls="--", lw=1, label=f"active median {stats.active_median:g}")
        ax.axvline(stats.inactive_median, color="tab:orange", ls="--", lw=1,
                   label=f"inactive median {stats.inactive_median:g}")
        ax.set_xscale("log")
        ax.set_xlabel("daily downloads (zero days excluded)")
        ax.set_ylabel("fraction of days")
        ax.set_title(f"overlap {stats.overlap_coefficient:.3f}, Mann-Whitney p = {stats.p_value:.3g}")
        ax.legend(frameon=False)
        fig.tight_layout()
        _save(fig, path)
