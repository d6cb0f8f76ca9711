"""Figure rendering for the report path.

Each experiment panel (optimal behaviour rate, active state count and the
two conditional entropies) is drawn with thin per-seed traces and a marked
mean line, mirroring the layout of the emitted CSV panels.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

PANEL_LABELS = {
    "optimal_rate": "optimal behaviour rate",
    "n_states": "number of active states",
    "h_o_given_s": "H(o|s) [nats]",
    "h_c_given_s": "H(c|s) [nats]",
}


def _draw_panel(ax, summary, panel, color, label=None):
    series = summary.series(panel)
    for row in series:
        ax.plot(summary.trials, row, color=color, alpha=0.25, lw=0.7, ls="--")
    ax.plot(summary.trials, series.mean(axis=0), color=color, lw=1.8,
            marker="D", ms=3, label=label)


def _mark_switches(ax, config):
    if config.schedule == "none":
        return
    for k in range(config.period, config.total_trials, config.period):
        ax.axvline(k, color="0.6", lw=0.6, ls=":")


def render_run_figures(summary, out_dir) -> list:
    """One PNG per panel for a single run; returns written paths."""
    out = Path(out_dir)
    written = []
    for panel, label in PANEL_LABELS.items():
        fig, ax = plt.subplots(figsize=(6.4, 3.2), constrained_layout=True)
        _draw_panel(ax, summary, panel, "tab:blue")
        _mark_switches(ax, summary.config)
        ax.set_xlabel("trial")
        ax.set_ylabel(label)
        ax.set_title(f"{summary.config.agent} / {summary.config.noise_type} / "
                     f"{summary.config.schedule}")
        path = out / f"fig_{panel}.png"
        fig.savefig(path, dpi=130)
        plt.close(fig)
        written.append(path)
    return written


def render_comparison_figures(summary_a, summary_b, out_dir) -> list:
    """Overlayed panels for two agents on the same environment."""
    out = Path(out_dir)
    written = []
    for panel, label in PANEL_LABELS.items():
        fig, ax = plt.subplots(figsize=(6.4, 3.2), constrained_layout=True)
        _draw_panel(ax, summary_a, panel, "tab:blue", summary_a.config.agent)
        _draw_panel(ax, summary_b, panel, "tab:red", summary_b.config.agent)
        _mark_switches(ax, summary_a.config)
        ax.set_xlabel("trial")
        ax.set_ylabel(label)
        ax.set_title(f"{summary_a.config.noise_type} / {summary_a.config.schedule}")
        ax.legend(loc="best", fontsize=8)
        path = out / f"fig_compare_{panel}.png"
        fig.savefig(path, dpi=130)
        plt.close(fig)
        written.append(path)
    return written
