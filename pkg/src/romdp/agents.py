"""Online agent wrappers: belief filtering, window buffering, planning.

An agent owns one inference model, keeps a filtered belief over its state
axis between window updates, buffers the last T steps, and picks actions
by Thompson sampling on its current planning posterior.  The value table
of the previous decision warm-starts the next solve.
"""

from __future__ import annotations

import numpy as np

from . import cei, goei
from .config import ExperimentConfig
from .planner import ats_decide
from .window import WindowData


class _OnlineAgent:
    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.window_size = config.window
        self._obs_buf: list = []
        self._act_buf: list = []
        self._rew_buf: list = []
        self._obs = None
        self._prev_action = 0
        self._q_warm = None
        self._belief = None
        self._exp = None

    def start(self, first_obs: int):
        """Install the first observation; the belief chain starts from the
        model's initial state prior and a placeholder previous action 0.
        """
        self._obs = int(first_obs)
        self._prev_action = 0
        self._belief = self.model.belief_prior.copy()
        self._exp = self.model.expectations()

    def act(self, rng: np.random.Generator) -> int:
        """Thompson-sample a model, solve it, act greedily on the pending
        belief (current observation incorporated, reward still unknown).
        """
        pending = self._filter(self._belief, self._obs, self._prev_action, None)
        action, q = ats_decide(pending, self.model.planning_posterior(),
                               self.config.gamma, rng, tol=self.config.vi_tol,
                               max_iter=self.config.vi_max_iter, q_init=self._q_warm)
        self._q_warm = q
        return action

    def observe(self, action: int, reward: int, next_obs: int):
        """Complete the trial: settle the belief with the revealed reward,
        buffer the step and move to the next observation.
        """
        self._belief = self._filter(self._belief, self._obs, self._prev_action, reward)
        self._obs_buf.append(self._obs)
        self._act_buf.append(self._prev_action)
        self._rew_buf.append(reward)
        self._obs = int(next_obs)
        self._prev_action = int(action)

    @property
    def window_full(self) -> bool:
        return len(self._obs_buf) >= self.window_size

    def update_window(self):
        """Run windowed inference over the buffered steps and refresh the
        cached expectations and belief; returns the final posteriors.
        """
        window = WindowData(np.array(self._obs_buf), np.array(self._act_buf),
                            np.array(self._rew_buf))
        posteriors = self._infer(window)
        self._obs_buf.clear()
        self._act_buf.clear()
        self._rew_buf.clear()
        self._exp = self.model.expectations()
        self._belief = self.model.belief_prior.copy()
        return posteriors

    def active_count(self, threshold=None) -> int:
        from .goei import active_states

        threshold = self.config.active_threshold if threshold is None else threshold
        return len(active_states(self.model, threshold))

    @property
    def n_states(self) -> int:
        return self.model.n_states


class CeiAgent(_OnlineAgent):
    name = "cei"

    def __init__(self, config: ExperimentConfig):
        super().__init__(config)
        self.model = cei.CeiModel(config.n_obs, n_modules=config.k_modules,
                                  prior=config.prior,
                                  module_prior=config.module_prior,
                                  alpha_trans=config.alpha_trans,
                                  alpha_reward=config.alpha_reward)

    def _filter(self, prev, obs, action, reward):
        return cei.cei_filter_step(self._exp, prev, obs, action, reward)

    def _infer(self, window):
        _, posteriors, _ = cei.cei_infer_window(
            self.model, window, max_sweeps=self.config.max_sweeps,
            fe_tol=self.config.fe_tol)
        return posteriors


class GoeiAgent(_OnlineAgent):
    name = "goei"

    def __init__(self, config: ExperimentConfig):
        super().__init__(config)
        self.model = goei.GoeiModel(
            config.n_obs, k_states=config.k_states, n_ar_modules=config.k_modules,
            n_aux_modules=config.k_modules, prior=config.prior,
            module_prior=config.module_prior,
            alpha_cluster=config.alpha_cluster, alpha_ar=config.alpha_ar,
            alpha_trans=config.alpha_trans, alpha_reward=config.alpha_reward,
            rho=config.rho, evidence_retention=config.evidence_retention)

    def _filter(self, prev, obs, action, reward):
        return goei.goei_filter_step(self._exp, prev, obs, action, reward)

    def _infer(self, window):
        _, posteriors, _ = goei.goei_infer_window(
            self.model, window, max_sweeps=self.config.max_sweeps,
            fe_tol=self.config.fe_tol)
        return posteriors


def make_agent(config: ExperimentConfig) -> _OnlineAgent:
    return GoeiAgent(config) if config.agent == "goei" else CeiAgent(config)
