"""Experiment orchestration: seeded online loops, per-window metrics,
aggregation over seeds, and delimited output with a machine-readable
manifest.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agents import make_agent
from .config import ExperimentConfig
from .env import (NoiseModel, RomdpEnv, default_core_mdp, oracle_action_sets,
                  periodic_schedule)
from .errors import ConfigError
from .metrics import JointCounts, conditional_entropy, optimal_rate

CSV_HEADER = "trial,seed,agent,noise_type,optimal_rate,n_states,h_o_given_s,h_c_given_s,mean_reward"
PANELS = ("optimal_rate", "n_states", "h_o_given_s", "h_c_given_s")


@dataclass
class TrialRecord:
    """One step of the online loop (kept only when tracing is enabled)."""

    trial: int
    observation: int
    action: int
    reward: int
    true_core: int
    map_state: int
    belief_entropy: float


@dataclass
class SeedResult:
    seed: int
    trials: np.ndarray
    optimal_rate: np.ndarray
    n_states: np.ndarray
    h_o_given_s: np.ndarray
    h_c_given_s: np.ndarray
    mean_reward: np.ndarray
    trace: list = field(default_factory=list)


@dataclass
class RunSummary:
    config: ExperimentConfig
    results: list

    @property
    def trials(self) -> np.ndarray:
        return self.results[0].trials

    def series(self, panel: str) -> np.ndarray:
        return np.stack([getattr(r, panel) for r in self.results])

    def mean(self, panel: str) -> np.ndarray:
        return self.series(panel).mean(axis=0)

    @property
    def n_windows(self) -> int:
        return self.trials.shape[0]


def run_experiment(config: ExperimentConfig, trace: bool = False,
                   progress: bool = False) -> RunSummary:
    """Run every configured seed and collect per-window series."""
    results = []
    for seed in config.seeds:
        t0 = time.perf_counter()
        results.append(run_seed(config, seed, trace=trace))
        if progress:
            print(f"seed {seed}: {time.perf_counter() - t0:.1f}s", flush=True)
    return RunSummary(config, results)


def run_seed(config: ExperimentConfig, seed: int, trace: bool = False) -> SeedResult:
    """One deterministic online run: act, step, buffer, infer every T steps."""
    rng_core, rng_noise, rng_agent = [
        np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)]
    e0, e1 = config.noise_probs()
    env = RomdpEnv(default_core_mdp(),
                   NoiseModel(config.noise_kind, e0, e1, config.noise_bits),
                   periodic_schedule(config.schedule_change, config.period,
                                     config.total_trials),
                   rng_core, rng_noise)
    agent = make_agent(config)
    agent.start(env.observation())

    t_len = config.window
    n_windows = config.total_trials // t_len
    out = {p: np.empty(n_windows) for p in PANELS}
    out["mean_reward"] = np.empty(n_windows)
    trials = np.empty(n_windows, dtype=int)
    records = []

    cores = np.empty(t_len, dtype=int)
    obs_arr = np.empty(t_len, dtype=int)
    acts = np.empty(t_len, dtype=int)
    rews = np.empty(t_len, dtype=int)
    oracle_sets = oracle_action_sets(env.core_mdp, config.gamma)

    for t in range(1, config.total_trials + 1):
        i = (t - 1) % t_len
        cores[i] = env.core
        obs_arr[i] = env.observation()
        action = agent.act(rng_agent)
        next_obs, reward = env.step(action)
        agent.observe(action, reward, next_obs)
        acts[i] = action
        rews[i] = reward

        if i == t_len - 1:
            w = t // t_len - 1
            posteriors = agent.update_window()
            counts = JointCounts(4, config.n_obs, agent.n_states)
            for j in range(t_len):
                counts.accumulate(cores[j], obs_arr[j], posteriors.marginals[j])
            trials[w] = t
            out["optimal_rate"][w] = optimal_rate(cores, acts, oracle_sets)
            out["n_states"][w] = agent.active_count()
            out["h_o_given_s"][w] = conditional_entropy(counts.os_counts)
            out["h_c_given_s"][w] = conditional_entropy(counts.cs_counts)
            out["mean_reward"][w] = rews.mean()
            if trace:
                for j in range(t_len):
                    b = posteriors.marginals[j]
                    nz = b[b > 0.0]
                    records.append(TrialRecord(
                        t - t_len + 1 + j, int(obs_arr[j]), int(acts[j]),
                        int(rews[j]), int(cores[j]), int(b.argmax()),
                        float(-(nz * np.log(nz)).sum())))
            # The schedule may have swapped rules at this boundary; rescore
            # the oracle for the next window.
            oracle_sets = oracle_action_sets(env.core_mdp, config.gamma)

    return SeedResult(seed, trials, out["optimal_rate"], out["n_states"],
                      out["h_o_given_s"], out["h_c_given_s"], out["mean_reward"],
                      records)


def compare_agents(config_a: ExperimentConfig, config_b: ExperimentConfig,
                   progress: bool = False):
    """Run two configurations that differ only in the agent field."""
    for f in ("noise_type", "noise_bits", "schedule", "period", "total_trials",
              "window", "gamma", "seeds"):
        if getattr(config_a, f) != getattr(config_b, f):
            raise ConfigError(f, "compared configurations must agree on this key")
    if config_a.agent == config_b.agent:
        raise ConfigError("agent", "compared configurations must use different agents")
    return (run_experiment(config_a, progress=progress),
            run_experiment(config_b, progress=progress))


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def results_csv(summary: RunSummary) -> str:
    """The canonical delimited output, one row per (seed, window)."""
    cfg = summary.config
    lines = [CSV_HEADER]
    for r in summary.results:
        for w in range(summary.n_windows):
            lines.append(",".join([
                str(int(r.trials[w])), str(r.seed), cfg.agent, cfg.noise_type,
                _fmt(r.optimal_rate[w]), _fmt(r.n_states[w]),
                _fmt(r.h_o_given_s[w]), _fmt(r.h_c_given_s[w]),
                _fmt(r.mean_reward[w])]))
    return "\n".join(lines) + "\n"


def panel_csv(summary: RunSummary, panel: str) -> str:
    """Plot-ready series for one panel: per-seed columns plus the mean."""
    if panel not in PANELS:
        raise ValueError(f"unknown panel {panel!r}")
    header = ["trial"] + [f"seed_{r.seed}" for r in summary.results] + ["mean"]
    series = summary.series(panel)
    mean = series.mean(axis=0)
    lines = [",".join(header)]
    for w in range(summary.n_windows):
        row = [str(int(summary.trials[w]))]
        row += [_fmt(series[s, w]) for s in range(len(summary.results))]
        row.append(_fmt(mean[w]))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def emit_plot_data(summary: RunSummary, out_dir, figures: bool = True) -> list:
    """Write results.csv, one file per figure panel, a manifest, and (by
    default) rendered figures.  Returns the list of written paths.
    """
    if summary.n_windows == 0 or not summary.results:
        raise ValueError("summary holds no windows to emit")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "results.csv"
    path.write_text(results_csv(summary), encoding="utf-8")
    written.append(path)
    for panel in PANELS:
        p = out / f"{panel}.csv"
        p.write_text(panel_csv(summary, panel), encoding="utf-8")
        written.append(p)
    if figures:
        from .figures import render_run_figures

        written += render_run_figures(summary, out)

    manifest = {
        "agent": summary.config.agent,
        "noise_type": summary.config.noise_type,
        "schedule": summary.config.schedule,
        "seeds": list(summary.config.seeds),
        "n_windows": summary.n_windows,
        "window": summary.config.window,
        "total_trials": summary.config.total_trials,
        "files": [p.name for p in written],
    }
    mpath = out / "manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                     encoding="utf-8")
    written.append(mpath)
    return written


def emit_comparison(summary_a: RunSummary, summary_b: RunSummary, out_dir,
                    figures: bool = True) -> list:
    """Side-by-side emission for two agents on the same environment."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for summary in (summary_a, summary_b):
        sub = out / summary.config.agent
        written += emit_plot_data(summary, sub, figures=False)
    for panel in PANELS:
        header = ["trial", f"{summary_a.config.agent}_mean", f"{summary_b.config.agent}_mean"]
        lines = [",".join(header)]
        ma, mb = summary_a.mean(panel), summary_b.mean(panel)
        for w in range(summary_a.n_windows):
            lines.append(",".join([str(int(summary_a.trials[w])), _fmt(ma[w]), _fmt(mb[w])]))
        p = out / f"compare_{panel}.csv"
        p.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(p)
    if figures:
        from .figures import render_comparison_figures

        written += render_comparison_figures(summary_a, summary_b, out)
    return written
