import json

import numpy as np
import pytest

from romdp.config import ExperimentConfig
from romdp.errors import ConfigError
from romdp.runner import (PANELS, RunSummary, compare_agents, emit_comparison,
                          emit_plot_data, panel_csv, results_csv, run_experiment,
                          run_seed)

TINY = dict(noise_bits=2, schedule="none", period=1000, total_trials=1000,
            window=250, k_states=12, k_modules=3, max_sweeps=6, seeds=(0, 1))


def tiny_config(**kw):
    base = dict(TINY)
    base.update(kw)
    return ExperimentConfig(**base)


class TestRunExperiment:
    def test_row_counts(self):
        cfg = tiny_config()
        summary = run_experiment(cfg)
        assert summary.n_windows == 4
        assert len(summary.results) == 2
        csv = results_csv(summary)
        assert len(csv.strip().splitlines()) == 1 + 2 * 4

    def test_deterministic_csv(self):
        cfg = tiny_config(seeds=(3,))
        a = results_csv(run_experiment(cfg))
        b = results_csv(run_experiment(cfg))
        assert a == b

    def test_cei_agent_runs(self):
        cfg = tiny_config(agent="cei", seeds=(0,))
        summary = run_experiment(cfg)
        assert summary.series("n_states").shape == (1, 4)

    def test_trace_records(self):
        cfg = tiny_config(seeds=(0,))
        r = run_seed(cfg, 0, trace=True)
        assert len(r.trace) == cfg.total_trials
        rec = r.trace[0]
        assert rec.trial == 1
        assert 0 <= rec.observation < cfg.n_obs
        assert rec.action in (0, 1)
        assert rec.reward in (0, 1)
        assert 0 <= rec.true_core < 4
        assert rec.belief_entropy >= 0.0

    def test_schedule_rows_do_not_mix_rules(self):
        # period == window means the oracle used for a window is the one
        # active when the window started
        cfg = tiny_config(schedule="reward_switch", period=250, total_trials=1000,
                          window=250, seeds=(0,))
        summary = run_experiment(cfg)
        assert summary.n_windows == 4

    def test_mean_over_single_seed_is_trace(self):
        cfg = tiny_config(seeds=(5,))
        summary = run_experiment(cfg)
        assert np.array_equal(summary.mean("optimal_rate"),
                              summary.series("optimal_rate")[0])

    def test_cei_solves_noise_free_task(self):
        # with no noise bits the observation is the core, and the baseline
        # must reach the oracle policy quickly
        cfg = ExperimentConfig(agent="cei", noise_bits=0, schedule="none",
                               period=2000, total_trials=2000, window=250,
                               k_modules=4, seeds=(0,))
        r = run_seed(cfg, 0)
        assert r.optimal_rate[-4:].mean() >= 0.9


class TestEmission:
    def test_panel_and_results_files(self, tmp_path):
        summary = run_experiment(tiny_config())
        written = emit_plot_data(summary, tmp_path, figures=False)
        names = {p.name for p in written}
        assert names == {"results.csv", "optimal_rate.csv", "n_states.csv",
                         "h_o_given_s.csv", "h_c_given_s.csv", "manifest.json"}
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["n_windows"] == 4
        header = (tmp_path / "optimal_rate.csv").read_text().splitlines()[0]
        assert header == "trial,seed_0,seed_1,mean"
        results_header = (tmp_path / "results.csv").read_text().splitlines()[0]
        assert results_header == ("trial,seed,agent,noise_type,optimal_rate,"
                                  "n_states,h_o_given_s,h_c_given_s,mean_reward")

    def test_figures_rendered(self, tmp_path):
        summary = run_experiment(tiny_config(seeds=(0,)))
        written = emit_plot_data(summary, tmp_path, figures=True)
        pngs = [p for p in written if p.suffix == ".png"]
        assert len(pngs) == 4
        for p in pngs:
            data = p.read_bytes()
            assert data[:8] == b"\x89PNG\r\n\x1a\n"
            assert len(data) > 1000

    def test_reemission_idempotent(self, tmp_path):
        summary = run_experiment(tiny_config(seeds=(0,)))
        emit_plot_data(summary, tmp_path, figures=False)
        first = (tmp_path / "results.csv").read_text()
        emit_plot_data(summary, tmp_path, figures=False)
        assert (tmp_path / "results.csv").read_text() == first

    def test_empty_summary_rejected(self, tmp_path):
        summary = RunSummary(tiny_config(), [])
        with pytest.raises((ValueError, IndexError)):
            emit_plot_data(summary, tmp_path)

    def test_unknown_panel_rejected(self):
        summary = run_experiment(tiny_config(seeds=(0,)))
        with pytest.raises(ValueError):
            panel_csv(summary, "regret")


class TestCompare:
    def test_misaligned_configs_rejected(self):
        a = tiny_config(agent="goei")
        b = tiny_config(agent="cei", window=500, period=1000)
        with pytest.raises(ConfigError):
            compare_agents(a, b)

    def test_same_agent_rejected(self):
        with pytest.raises(ConfigError):
            compare_agents(tiny_config(), tiny_config())

    def test_side_by_side(self, tmp_path):
        a = tiny_config(agent="goei", seeds=(0,))
        b = tiny_config(agent="cei", seeds=(0,))
        sa, sb = compare_agents(a, b)
        written = emit_comparison(sa, sb, tmp_path, figures=False)
        names = {p.name for p in written}
        for panel in PANELS:
            assert f"compare_{panel}.csv" in names
        text = (tmp_path / "compare_optimal_rate.csv").read_text()
        assert text.splitlines()[0] == "trial,goei_mean,cei_mean"
        assert (tmp_path / "goei" / "results.csv").exists()
        assert (tmp_path / "cei" / "results.csv").exists()
