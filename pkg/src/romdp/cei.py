"""Complete environment inference: variational Bayes over a model that
predicts observations, with Dirichlet-process mixtures of transition and
reward modules.

The state axis is pinned to the observation count, so this engine can
never shrink its state space; it is the baseline the goal-oriented engine
is compared against.  Within a window the approximate posterior factorizes
as a forward chain q(s_t, M_t, N_t | s_{t-1}) and parameters stay conjugate
(Dirichlet tables plus truncated stick-breaking weights), so each sweep is
one forward pass and one closed-form parameter refresh.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .probability import (StickWeights, dirichlet_kl, expected_log_dirichlet,
                          sbp_order, stick_kl)
from .planner import PlanningPosterior
from .window import WindowData, chain_step

N_ACTIONS = 2
N_REWARDS = 2


@dataclass
class CeiExpectations:
    """Expected-log tables under the current parameter posterior."""

    obs: np.ndarray          # (O, S)   E[ln p(o | s)]
    lse_trans: np.ndarray    # (S, S, A) module-marginalized transition scores
    w_trans: np.ndarray      # (X, S, S, A) module responsibilities
    lse_reward: np.ndarray   # (R, S)
    w_reward: np.ndarray     # (Z, R, S)


@dataclass
class CeiPosteriors:
    """E-step output: chain marginals plus the sufficient statistics the
    M-step needs.  Per-step joint distributions over (s_{t-1}, s_t) are
    kept in full; the module axes factorize through ``w_trans``/``w_reward``
    and can be reattached with :meth:`step_joint`.
    """

    window: WindowData
    marginals: np.ndarray            # (T, S) q(s_t)
    joints: np.ndarray               # (T, S, S) q(s_t, s_{t-1})
    trans_counts: np.ndarray         # (A, S, S) sum_t 1(a_{t-1}=a) q(s_t, s_{t-1})
    reward_counts: np.ndarray        # (R, S) sum_t 1(r_t=r) q(s_t)
    obs_counts: np.ndarray           # (O, S) sum_t 1(o_t=o) q(s_t)
    expectations: CeiExpectations
    chain_ll: float

    def step_joint(self, t: int) -> np.ndarray:
        """Full q(s_{t-1}, s_t, M_t, N_t) for step t (small instances)."""
        a = self.window.actions[t]
        r = self.window.rewards[t]
        pair = self.joints[t].T                      # (s_prev, s_next)
        wm = self.expectations.w_trans[:, :, :, a]   # (X, s_next, s_prev)
        wn = self.expectations.w_reward[:, r, :]     # (Z, s_next)
        out = (pair[None, :, :] * wm.transpose(0, 2, 1)).transpose(1, 2, 0)
        return out[:, :, :, None] * wn.T[None, :, None, :]


class CeiModel:
    """Posterior state for the observation-predicting engine."""

    def __init__(self, n_obs: int, n_modules: int = 10, prior: float = 0.1,
                 module_prior: float = 1.0, alpha_trans: float = 1.0,
                 alpha_reward: float = 1.0):
        if n_obs < 2:
            raise ValueError("need at least two observations")
        s = n_obs
        self.n_obs = n_obs
        self.n_states = s
        # Observation and next-state axes keep the small seed; the binary
        # reward axis gets a flat unit prior (see the goal-oriented engine
        # for the reasoning about novelty penalties).  The state axis is
        # exchangeable under a perfectly symmetric prior, so nothing could
        # ever break the label symmetry; a small diagonal tilt selects the
        # canonical state-per-observation labelling without favouring any
        # particular environment structure.
        self.obs_rule = np.full((n_obs, s), prior)
        self.obs_rule[np.diag_indices(min(n_obs, s))] += 0.1 * prior
        self._obs_seed = prior
        self.trans_modules = np.full((n_modules, s, s, N_ACTIONS), prior)
        self.reward_modules = np.full((n_modules, N_REWARDS, s), module_prior)
        self.trans_sticks = StickWeights(np.zeros(n_modules), alpha_trans)
        self.reward_sticks = StickWeights(np.zeros(n_modules), alpha_reward)
        self.belief_prior = np.full(s, 1.0 / s)
        self.last_responsibility = None
        self._snapshot_priors()

    def _snapshot_priors(self):
        self.prior_obs_rule = self.obs_rule.copy()
        self.prior_trans_modules = self.trans_modules.copy()
        self.prior_reward_modules = self.reward_modules.copy()
        self.prior_trans_sticks = self.trans_sticks.counts.copy()
        self.prior_reward_sticks = self.reward_sticks.counts.copy()
        # Stick evaluation order is pinned per window (from the prior) so
        # the variational objective cannot jump when counts cross mid-sweep.
        self._trans_order = sbp_order(self.prior_trans_sticks)
        self._reward_order = sbp_order(self.prior_reward_sticks)

    def expectations(self) -> CeiExpectations:
        e_obs = expected_log_dirichlet(self.obs_rule)
        e_m = expected_log_dirichlet(self.trans_modules.transpose(1, 0, 2, 3))
        e_m = (e_m.transpose(1, 0, 2, 3)
               + self.trans_sticks.expected_log(self._trans_order)[:, None, None, None])
        lse_m, w_m = _lse_softmax(e_m)
        e_n = expected_log_dirichlet(self.reward_modules.transpose(1, 0, 2))
        e_n = (e_n.transpose(1, 0, 2)
               + self.reward_sticks.expected_log(self._reward_order)[:, None, None])
        lse_n, w_n = _lse_softmax(e_n)
        return CeiExpectations(e_obs, lse_m, w_m, lse_n, w_n)

    def parameter_kl(self) -> float:
        """KL(q(parameters) || window-start prior), all factors summed."""
        kl = dirichlet_kl(self.obs_rule, self.prior_obs_rule)
        for x in range(self.trans_modules.shape[0]):
            kl += dirichlet_kl(self.trans_modules[x], self.prior_trans_modules[x])
            kl += dirichlet_kl(self.reward_modules[x], self.prior_reward_modules[x])
        kl += stick_kl(self.trans_sticks.counts, self.prior_trans_sticks,
                       self.trans_sticks.alpha, order=self._trans_order)
        kl += stick_kl(self.reward_sticks.counts, self.prior_reward_sticks,
                       self.reward_sticks.alpha, order=self._reward_order)
        return kl

    def planning_posterior(self) -> PlanningPosterior:
        return PlanningPosterior(self.trans_modules, self.trans_sticks.counts,
                                 self.reward_modules, self.reward_sticks.counts)

    def copy(self) -> "CeiModel":
        import copy as _copy

        return _copy.deepcopy(self)


def _lse_softmax(scores: np.ndarray):
    """logsumexp and softmax over axis 0 in one pass."""
    m = scores.max(axis=0)
    w = np.exp(scores - m)
    z = w.sum(axis=0)
    return m + np.log(z), w / z


def _step_score(exp: CeiExpectations, obs: int, action: int, reward=None) -> np.ndarray:
    score = exp.obs[obs][:, None] + exp.lse_trans[:, :, action]
    if reward is not None:
        score = score + exp.lse_reward[reward][:, None]
    return score


def cei_filter_step(exp: CeiExpectations, prev_belief: np.ndarray, obs: int,
                    action: int, reward=None) -> np.ndarray:
    """One online filtering step; ``reward=None`` gives the belief used for
    action selection (the reward of the current state is not yet known).
    """
    _, marginal, _ = chain_step(_step_score(exp, obs, action, reward), prev_belief)
    return marginal


def cei_e_step(model: CeiModel, window: WindowData,
               exp: CeiExpectations | None = None) -> CeiPosteriors:
    """Forward pass over the window under the current posterior."""
    if exp is None:
        exp = model.expectations()
    if (not np.isfinite(exp.obs).all() or not np.isfinite(exp.lse_trans).all()
            or not np.isfinite(exp.lse_reward).all()):
        from .errors import DegenerateDistributionError

        raise DegenerateDistributionError("expected-log tables lost all mass")
    s = model.n_states
    t_len = len(window)
    marginals = np.empty((t_len, s))
    joints = np.empty((t_len, s, s))
    trans_counts = np.zeros((N_ACTIONS, s, s))
    reward_counts = np.zeros((N_REWARDS, s))
    obs_counts = np.zeros((model.n_obs, s))
    prev = model.belief_prior
    chain_ll = 0.0
    col = np.empty(s)
    obs, acts, rews = window.observations, window.actions, window.rewards
    for t in range(t_len):
        o, a, r = obs[t], acts[t], rews[t]
        j = joints[t]
        np.add(exp.obs[o], exp.lse_reward[r], out=col)
        np.add(exp.lse_trans[:, :, a], col[:, None], out=j)
        colmax = j.max(axis=0)
        j -= colmax
        np.exp(j, out=j)
        z = j.sum(axis=0)
        j /= z
        j *= prev
        j[j < 1e-14] = 0.0
        j /= j.sum()
        marg = j.sum(axis=1)
        marginals[t] = marg
        trans_counts[a] += j
        reward_counts[r] += marg
        obs_counts[o] += marg
        colmax += np.log(z)
        chain_ll += prev @ colmax
        prev = marg
    return CeiPosteriors(window, marginals, joints, trans_counts, reward_counts,
                         obs_counts, exp, chain_ll)


def cei_m_step(model: CeiModel, window: WindowData,
               posteriors: CeiPosteriors) -> CeiModel:
    """Closed-form parameter refresh from the window-start priors."""
    exp = posteriors.expectations
    model.obs_rule = model.prior_obs_rule + posteriors.obs_counts
    trans_mass = posteriors.trans_counts.transpose(1, 2, 0)[None] * exp.w_trans
    reward_mass = posteriors.reward_counts[None] * exp.w_reward
    model.trans_modules = model.prior_trans_modules + trans_mass
    model.reward_modules = model.prior_reward_modules + reward_mass
    model.trans_sticks.counts = model.prior_trans_sticks + trans_mass.sum(axis=(1, 2, 3))
    model.reward_sticks.counts = model.prior_reward_sticks + reward_mass.sum(axis=(1, 2))
    return model


def cei_free_energy(model: CeiModel, posteriors: CeiPosteriors) -> float:
    """Variational free energy of (q(chain), q(parameters)) for the window."""
    return -posteriors.chain_ll + model.parameter_kl()


def cei_infer_window(model: CeiModel, window: WindowData, max_sweeps: int = 20,
                     fe_tol: float = 1e-4, check_fe: bool = False,
                     fe_slack: float = 1e-6):
    """Alternate E/M sweeps until the free energy stops moving, then chain
    the converged posterior into the priors for the next window.

    Returns (model, final posteriors, free-energy trace).
    """
    from .errors import ConsistencyError

    if max_sweeps < 1:
        raise ValueError("max_sweeps must be at least 1")
    fe_trace = []
    posteriors = None
    for _ in range(max_sweeps):
        posteriors = cei_e_step(model, window)
        fe = cei_free_energy(model, posteriors)
        cei_m_step(model, window, posteriors)
        if fe_trace and check_fe and fe > fe_trace[-1] + fe_slack:
            raise ConsistencyError(
                f"free energy rose from {fe_trace[-1]:.9g} to {fe:.9g}")
        done = bool(fe_trace) and abs(fe - fe_trace[-1]) < fe_tol
        fe_trace.append(fe)
        if done:
            break
    model.last_responsibility = posteriors.marginals.sum(axis=0)
    model.belief_prior = posteriors.marginals[-1].copy()
    model._snapshot_priors()
    return model, posteriors, np.asarray(fe_trace)
