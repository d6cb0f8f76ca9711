"""Goal-oriented environment inference.

This engine clusters observations into internal states by modelling only
the action-reward contingency p(r_t, a_{t-1} | s_t, s_{t-1}) together with
a per-observation clustering rule p(s_t | o_t); observations appear only
as conditions, never as predicted outcomes, so redundant observation
structure carries no evidence weight.  The state axis is a truncated
Dirichlet process (per-observation stick-breaking posteriors ranked by a
shared global state order), which lets the active state count grow and
shrink with the data.  The clustering rule is refreshed with a
confidence-gated forgetting factor, and the action-reward modules plus
the separately-estimated transition/reward tables carry a couple of
windows of discounted evidence: the learned state space persists while
rule-change judgments rest on recent data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError
from .planner import PlanningPosterior
from .probability import (StickWeights, dirichlet_kl, expected_log_dirichlet,
                          expected_log_sbp_matrix, sbp_order, stick_kl)
from .window import WindowData, chain_step

N_ACTIONS = 2
N_REWARDS = 2
_TRUNC = 1e-14


@dataclass
class GoeiExpectations:
    cluster: np.ndarray    # (K, O)  E[ln p(s | o)] under per-column sticks
    lse_ar: np.ndarray     # (A, R, K, K) module-marginalized action-reward scores
    w_ar: np.ndarray       # (Y, A, R, K, K) module responsibilities


@dataclass
class GoeiPosteriors:
    window: WindowData
    marginals: np.ndarray        # (T, K)
    joints: np.ndarray           # (T, K, K) q(s_t, s_{t-1})
    ar_counts: np.ndarray        # (A, R, K, K) sum_t 1(a,r) q(s_t, s_{t-1})
    reward_counts: np.ndarray    # (R, K) sum_t 1(r) q(s_t)
    expectations: GoeiExpectations
    chain_ll: float

    def step_joint(self, t: int) -> np.ndarray:
        """Full q(s_{t-1}, s_t, M'_t) for step t (small instances)."""
        a = self.window.actions[t]
        r = self.window.rewards[t]
        pair = self.joints[t].T                          # (s_prev, s_next)
        w = self.expectations.w_ar[:, a, r]              # (Y, s_next, s_prev)
        return pair[:, :, None] * w.transpose(2, 1, 0)


class GoeiModel:
    """Posterior state for the goal-oriented engine."""

    def __init__(self, n_obs: int, k_states: int = 70, n_ar_modules: int = 10,
                 n_aux_modules: int = 10, prior: float = 0.1,
                 module_prior: float = 1.0, alpha_cluster: float = 1.0,
                 alpha_ar: float = 1.0, alpha_trans: float = 1.0,
                 alpha_reward: float = 1.0, rho: float = 0.95,
                 evidence_retention: float = 0.15):
        if not 0.0 <= rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if not 0.0 < evidence_retention <= 1.0:
            raise ValueError("evidence_retention must lie in (0, 1]")
        k = k_states
        self.n_obs = n_obs
        self.n_states = k
        self.rho = rho
        self.evidence_retention = evidence_retention
        self._module_prior = module_prior
        self._trans_prior = prior
        self.alpha_cluster = alpha_cluster
        # Clustering seeds stay small (they double as stick pseudo-counts).
        # Tables with a small outcome axis (action-reward pairs, reward
        # symbols) get a flat unit prior so a fresh state's predictions are
        # neutral rather than punitive; otherwise the state space can never
        # grow past the first reward split.  Next-state axes keep the small
        # seed: a unit prior there would put k pseudo-counts on every row
        # and drown the learned transitions at planning time.
        self.cluster_rule = np.full((k, n_obs), prior)
        self._cluster_seed = prior
        self.ar_modules = np.full((n_ar_modules, N_ACTIONS, N_REWARDS, k, k),
                                  module_prior)
        self.ar_sticks = StickWeights(np.zeros(n_ar_modules), alpha_ar)
        self.aux_trans = np.full((n_aux_modules, k, k, N_ACTIONS), prior)
        self.aux_reward = np.full((n_aux_modules, N_REWARDS, k), module_prior)
        self.aux_trans_sticks = StickWeights(np.zeros(n_aux_modules), alpha_trans)
        self.aux_reward_sticks = StickWeights(np.zeros(n_aux_modules), alpha_reward)
        self.belief_prior = np.zeros(k)
        self.belief_prior[0] = 1.0
        self.last_responsibility = None
        self._e_ar_raw = None       # cached psi-based expected logs per column
        self._ar_changed = None     # flat (s', s) columns touched since the cache
        self._ar_support = None     # flat (s', s) columns carrying mass last sweep
        self._snapshot_priors()

    def _snapshot_priors(self):
        self.prior_cluster_rule = self.cluster_rule.copy()
        self.prior_ar_modules = self.ar_modules.copy()
        self.prior_ar_sticks = self.ar_sticks.counts.copy()
        self.prior_aux_trans = self.aux_trans.copy()
        self.prior_aux_reward = self.aux_reward.copy()
        self.prior_aux_trans_sticks = self.aux_trans_sticks.counts.copy()
        self.prior_aux_reward_sticks = self.aux_reward_sticks.counts.copy()
        # Stick evaluation orders are pinned per window (from the prior) so
        # the variational objective cannot jump when counts cross mid-sweep.
        # States are ranked globally by total clustering mass: every column
        # evaluates its sticks in this shared order, so a state serving few
        # observations sits at a late rank everywhere and pays a standing
        # prefix penalty until its columns migrate to better-used states.
        self._cluster_order = sbp_order(self.prior_cluster_rule.sum(axis=1))
        self._ar_order = sbp_order(self.prior_ar_sticks)

    def discount_evidence(self):
        """Geometric cross-window discount of the accumulated action-reward
        and rule evidence, shrinking each table toward its base prior.

        Rule-change judgment then rests on the last couple of windows of
        evidence, while the clustering itself (which is not discounted
        here) keeps the learned state space.  A retention of 1 disables
        the discount.
        """
        lam = self.evidence_retention
        if lam >= 1.0:
            return
        for arr, base in ((self.ar_modules, self._module_prior),
                          (self.aux_trans, self._trans_prior),
                          (self.aux_reward, self._module_prior)):
            arr *= lam
            arr += (1.0 - lam) * base
        self.ar_sticks.counts = lam * self.ar_sticks.counts
        self.aux_trans_sticks.counts = lam * self.aux_trans_sticks.counts
        self.aux_reward_sticks.counts = lam * self.aux_reward_sticks.counts
        self._e_ar_raw = None

    def expectations(self) -> GoeiExpectations:
        e_cluster = expected_log_sbp_matrix(self.cluster_rule, self.alpha_cluster,
                                            order=self._cluster_order)
        y, a, r, k, _ = self.ar_modules.shape
        flat = self.ar_modules.reshape(y, a * r, k * k)
        if self._e_ar_raw is None:
            raw = expected_log_dirichlet(flat.transpose(1, 0, 2)).transpose(1, 0, 2)
            self._e_ar_raw = raw
        elif self._ar_changed is not None and self._ar_changed.size:
            cols = self._ar_changed
            sub = flat[:, :, cols]
            self._e_ar_raw[:, :, cols] = expected_log_dirichlet(
                sub.transpose(1, 0, 2)).transpose(1, 0, 2)
        self._ar_changed = None
        e_ar = (self._e_ar_raw.reshape(y, a, r, k, k)
                + self.ar_sticks.expected_log(self._ar_order)[:, None, None, None, None])
        lse, w = _lse_softmax(e_ar)
        return GoeiExpectations(e_cluster, lse, w)

    def parameter_kl(self) -> float:
        kl = stick_kl(self.cluster_rule, self.prior_cluster_rule, self.alpha_cluster,
                      order=self._cluster_order)
        y = self.ar_modules.shape[0]
        k = self.n_states
        flat = self.ar_modules.reshape(y, N_ACTIONS * N_REWARDS, k, k)
        flat_prior = self.prior_ar_modules.reshape(y, N_ACTIONS * N_REWARDS, k, k)
        for i in range(y):
            kl += dirichlet_kl(flat[i], flat_prior[i])
        kl += stick_kl(self.ar_sticks.counts, self.prior_ar_sticks, self.ar_sticks.alpha,
                       order=self._ar_order)
        return kl

    def planning_posterior(self) -> PlanningPosterior:
        return PlanningPosterior(self.aux_trans, self.aux_trans_sticks.counts,
                                 self.aux_reward, self.aux_reward_sticks.counts)

    def copy(self) -> "GoeiModel":
        import copy as _copy

        return _copy.deepcopy(self)


def _lse_softmax(scores: np.ndarray):
    m = scores.max(axis=0)
    w = np.exp(scores - m)
    z = w.sum(axis=0)
    return m + np.log(z), w / z


def _step_score(exp: GoeiExpectations, obs: int, action: int, reward=None) -> np.ndarray:
    col = exp.cluster[:, obs][:, None]
    if reward is None:
        # Reward not yet revealed: marginalize the reward axis in log space.
        pair = exp.lse_ar[action]
        m = pair.max(axis=0)
        return col + m + np.log(np.exp(pair - m).sum(axis=0))
    return col + exp.lse_ar[action, reward]


def goei_filter_step(exp: GoeiExpectations, prev_belief: np.ndarray, obs: int,
                     action: int, reward=None) -> np.ndarray:
    """Online belief step; ``reward=None`` marginalizes the pending reward."""
    _, marginal, _ = chain_step(_step_score(exp, obs, action, reward), prev_belief)
    return marginal


def goei_e_step(model: GoeiModel, window: WindowData,
                exp: GoeiExpectations | None = None) -> GoeiPosteriors:
    """Forward pass of the clustering chain over one window."""
    if exp is None:
        exp = model.expectations()
    if not np.isfinite(exp.cluster).all() or not np.isfinite(exp.lse_ar).all():
        from .errors import DegenerateDistributionError

        raise DegenerateDistributionError("expected-log tables lost all mass")
    k = model.n_states
    t_len = len(window)
    marginals = np.empty((t_len, k))
    joints = np.empty((t_len, k, k))
    ar_counts = np.zeros((N_ACTIONS, N_REWARDS, k, k))
    reward_counts = np.zeros((N_REWARDS, k))
    prev = model.belief_prior
    chain_ll = 0.0
    obs, acts, rews = window.observations, window.actions, window.rewards
    for t in range(t_len):
        o, a, r = obs[t], acts[t], rews[t]
        j = joints[t]
        np.add(exp.lse_ar[a, r], exp.cluster[:, o][:, None], out=j)
        colmax = j.max(axis=0)
        j -= colmax
        np.exp(j, out=j)
        z = j.sum(axis=0)
        j /= z
        j *= prev
        # Exact-zero truncation keeps the sufficient statistics sparse, so
        # downstream updates and expected-log refreshes touch only the
        # state pairs that actually carry responsibility; the mass lost is
        # below k^2 * 1e-14 per step.
        j[j < _TRUNC] = 0.0
        j /= j.sum()
        marg = j.sum(axis=1)
        marginals[t] = marg
        ar_counts[a, r] += j
        reward_counts[r] += marg
        colmax += np.log(z)
        chain_ll += prev @ colmax
        prev = marg
    return GoeiPosteriors(window, marginals, joints, ar_counts, reward_counts,
                          exp, chain_ll)


def goei_m_step_with_forgetting(model: GoeiModel, window: WindowData,
                                posteriors: GoeiPosteriors) -> GoeiModel:
    """Parameter refresh from the window-start priors.

    Action-reward modules and their sticks update additively.  The
    clustering rule is rebuilt sequentially in time order: at each step
    only the observed column moves, each state's retention being gated by
    how much responsibility it holds, eta = (1 - rho)(1 - q(s_t=s)); a
    state that fully owns the step keeps everything and gains one count,
    a state with no responsibility decays by the maximum factor rho.
    """
    exp = posteriors.expectations
    mass = posteriors.ar_counts[None] * exp.w_ar
    model.ar_modules = model.prior_ar_modules + mass
    model.ar_sticks.counts = model.prior_ar_sticks + mass.sum(axis=(1, 2, 3, 4))
    # Columns needing an expected-log refresh: this sweep's support plus
    # the previous sweep's (a column abandoned by the responsibilities
    # reverts to its prior and must be refreshed too).
    support = np.flatnonzero(posteriors.ar_counts.any(axis=(0, 1)).ravel())
    prev_support = model._ar_support
    model._ar_changed = (support if prev_support is None
                         else np.union1d(prev_support, support))
    model._ar_support = support

    theta = model.prior_cluster_rule.copy()
    keep = model.rho
    for t in range(len(window)):
        o = window.observations[t]
        q = posteriors.marginals[t]
        eta = (1.0 - keep) * (1.0 - q)
        theta[:, o] = (1.0 - eta) * theta[:, o] + q
    model.cluster_rule = theta
    return model


def goei_aux_update(model: GoeiModel, window: WindowData,
                    posteriors: GoeiPosteriors) -> GoeiModel:
    """Refresh the planner-facing transition and reward tables.

    These live outside the clustering model: their module assignment
    posteriors are computed from their own expected logs and the state
    distribution inferred above is substituted into the standard additive
    updates.
    """
    k = model.n_states
    e_m = expected_log_dirichlet(model.prior_aux_trans.transpose(1, 0, 2, 3))
    e_m = e_m.transpose(1, 0, 2, 3) + StickWeights(
        model.prior_aux_trans_sticks, model.aux_trans_sticks.alpha
    ).expected_log()[:, None, None, None]
    _, w_m = _lse_softmax(e_m)
    e_n = expected_log_dirichlet(model.prior_aux_reward.transpose(1, 0, 2))
    e_n = e_n.transpose(1, 0, 2) + StickWeights(
        model.prior_aux_reward_sticks, model.aux_reward_sticks.alpha
    ).expected_log()[:, None, None]
    _, w_n = _lse_softmax(e_n)

    trans_counts = posteriors.ar_counts.sum(axis=1).transpose(1, 2, 0)  # (K, K, A)
    trans_mass = trans_counts[None] * w_m
    reward_mass = posteriors.reward_counts[None] * w_n
    model.aux_trans = model.prior_aux_trans + trans_mass
    model.aux_reward = model.prior_aux_reward + reward_mass
    model.aux_trans_sticks.counts = (model.prior_aux_trans_sticks
                                     + trans_mass.sum(axis=(1, 2, 3)))
    model.aux_reward_sticks.counts = (model.prior_aux_reward_sticks
                                      + reward_mass.sum(axis=(1, 2)))
    return model


def goei_free_energy(model: GoeiModel, posteriors: GoeiPosteriors) -> float:
    """Free energy of the clustering model (aux tables are outside it)."""
    return -posteriors.chain_ll + model.parameter_kl()


def goei_infer_window(model: GoeiModel, window: WindowData, max_sweeps: int = 20,
                      fe_tol: float = 1e-4, check_fe: bool = False,
                      fe_slack: float = 1e-6):
    """Alternate E/M sweeps, then refresh the aux tables once and chain the
    converged posterior into the priors of the next window.

    Returns (model, final posteriors, diagnostics dict).
    """
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be at least 1")
    model.discount_evidence()
    model._snapshot_priors()
    fe_trace = []
    posteriors = None
    for _ in range(max_sweeps):
        posteriors = goei_e_step(model, window)
        fe = goei_free_energy(model, posteriors)
        goei_m_step_with_forgetting(model, window, posteriors)
        if fe_trace and check_fe and fe > fe_trace[-1] + fe_slack:
            raise ConsistencyError(
                f"free energy rose from {fe_trace[-1]:.9g} to {fe:.9g}")
        done = bool(fe_trace) and abs(fe - fe_trace[-1]) < fe_tol
        fe_trace.append(fe)
        if done:
            break
    goei_aux_update(model, window, posteriors)
    model.last_responsibility = posteriors.marginals.sum(axis=0)
    model.belief_prior = posteriors.marginals[-1].copy()
    model._snapshot_priors()
    diagnostics = {
        "free_energy": np.asarray(fe_trace),
        "active_states": active_states(model),
        "responsibility": model.last_responsibility.copy(),
    }
    return model, posteriors, diagnostics


def active_states(model, threshold: float = 1.0) -> list:
    """States the model currently uses, heaviest first.

    A state counts as active when its clustering-rule evidence (column
    entries above the base seed, summed over observations) exceeds the
    threshold, i.e. the map sends at least that much accumulated belief
    to it.  States parked on unvisited observations keep their evidence
    and stay active; states whose columns were remapped away decay out.
    Works for both engines (the baseline's observation rule is read along
    its state axis).  Empty before any data has been seen.
    """
    if threshold <= 0.0:
        raise ValueError("threshold must be positive")
    mass = state_evidence(model)
    idx = np.flatnonzero(mass > threshold)
    return idx[np.argsort(-mass[idx], kind="stable")].tolist()


def state_evidence(model) -> np.ndarray:
    """Per-state accumulated clustering evidence above the prior seed."""
    if hasattr(model, "cluster_rule"):
        excess = model.cluster_rule - model._cluster_seed
        axis = 1
    else:
        excess = model.obs_rule - model._obs_seed
        axis = 0
    return np.clip(excess, 0.0, None).sum(axis=axis)
