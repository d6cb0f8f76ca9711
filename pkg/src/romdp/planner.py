"""Exact value iteration and Action-value Thompson Sampling.

The planner never looks at the environment: it consumes posterior tables
over transition and reward rules (from either inference engine), samples
one concrete model per decision step, solves the optimal Bellman equation
on the sample and acts greedily on the belief-averaged action values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError

_TIE_EPS = 1e-9


@dataclass
class SampledModel:
    """One concrete model draw: trans[s', s, a] and reward[r, s]."""

    trans: np.ndarray
    reward: np.ndarray
    reward_values: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0]))

    def expected_reward(self) -> np.ndarray:
        return self.reward_values @ self.reward


@dataclass
class PlanningPosterior:
    """Dirichlet module tables plus stick counts, as the planner sees them.

    trans_tables:  (X, S, S, A) concentrations, outcome axis = next state
    reward_tables: (Z, R, S) concentrations, outcome axis = reward symbol
    """

    trans_tables: np.ndarray
    trans_counts: np.ndarray
    reward_tables: np.ndarray
    reward_counts: np.ndarray
    reward_values: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0]))


def value_iteration(trans, expected_reward, gamma, tol=1e-6, max_iter=10_000,
                    q_init=None) -> np.ndarray:
    """Solve Q(s,a) = sum_s' trans[s',s,a] (r(s') + gamma max_a' Q(s',a')).

    Iterates until the sup-norm change drops below tol*(1-gamma)/gamma
    (or one sweep when gamma == 0), which bounds the Bellman residual of
    the returned table by tol.  Raises ConvergenceError if the iteration
    cap is hit while the residual still exceeds tol.
    """
    trans = np.asarray(trans, dtype=float)
    r = np.asarray(expected_reward, dtype=float)
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    n_states, _, n_actions = trans.shape
    flat = trans.reshape(n_states, n_states * n_actions)
    q = np.zeros((n_states, n_actions)) if q_init is None else np.array(q_init, dtype=float)
    thresh = np.inf if gamma == 0.0 else tol * (1.0 - gamma) / gamma
    change = np.inf
    for _ in range(max_iter):
        u = r + gamma * q.max(axis=1)
        q_next = (u @ flat).reshape(n_states, n_actions)
        change = np.abs(q_next - q).max()
        q = q_next
        if change < thresh:
            return q
    u = r + gamma * q.max(axis=1)
    residual = np.abs((u @ flat).reshape(n_states, n_actions) - q).max()
    if residual > tol:
        raise ConvergenceError(
            f"value iteration did not reach tol={tol} in {max_iter} sweeps", residual)
    return q


def solve_q(trans, expected_reward, gamma, tol=1e-6, q_init=None) -> np.ndarray:
    """Howard-style policy iteration for the same fixed point.

    Each round evaluates the current greedy policy exactly by solving the
    linear system (I - gamma * P_pi^T) v = P_pi^T r and re-greedifies; this
    reaches the optimum in a handful of rounds where plain sweeps need
    hundreds.  The returned table is checked against the same Bellman
    residual bound as :func:`value_iteration`.
    """
    trans = np.asarray(trans, dtype=float)
    r = np.asarray(expected_reward, dtype=float)
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    n_states, _, n_actions = trans.shape
    if gamma == 0.0:
        flat = trans.reshape(n_states, n_states * n_actions)
        return (r @ flat).reshape(n_states, n_actions)
    q = np.zeros((n_states, n_actions)) if q_init is None else np.asarray(q_init, dtype=float)
    policy = q.argmax(axis=1)
    eye = np.eye(n_states)
    idx = np.arange(n_states)
    flat = trans.reshape(n_states, n_states * n_actions)
    for _ in range(200):
        p_pi = trans[:, idx, policy]            # (s', s) under the greedy policy
        v = np.linalg.solve(eye - gamma * p_pi.T, p_pi.T @ r)
        q = ((r + gamma * v) @ flat).reshape(n_states, n_actions)
        new_policy = q.argmax(axis=1)
        if np.array_equal(new_policy, policy):
            break
        policy = new_policy
    u = r + gamma * q.max(axis=1)
    residual = np.abs((u @ flat).reshape(n_states, n_actions) - q).max()
    if residual > tol:
        raise ConvergenceError("policy iteration left a Bellman residual above tol",
                               residual)
    return q


def greedy_policy(trans, expected_reward, gamma, tol=1e-9) -> np.ndarray:
    """Argmax action per state of the exact Q table."""
    q = value_iteration(trans, expected_reward, gamma, tol=tol)
    return q.argmax(axis=1)


def optimal_action_sets(trans, expected_reward, gamma, tol=1e-9):
    """Per-state frozen sets of actions whose Q ties the maximum.

    Exact ties occur in these environments (two routes of identical
    value), so behaviour scoring treats every tied action as optimal.
    """
    q = value_iteration(trans, expected_reward, gamma, tol=tol)
    slack = 1e-6 * (1.0 + np.abs(q).max())
    return [frozenset(np.flatnonzero(q[s] >= q[s].max() - slack).tolist())
            for s in range(q.shape[0])]


def sample_model(posterior: PlanningPosterior, rng: np.random.Generator) -> SampledModel:
    """Thompson draw: module indices from normalized stick counts, then an
    exact Dirichlet sample of every conditional row of the chosen modules.
    """
    x = _sample_index(posterior.trans_counts, rng)
    z = _sample_index(posterior.reward_counts, rng)
    trans = _dirichlet_table(posterior.trans_tables[x], rng)
    reward = _dirichlet_table(posterior.reward_tables[z], rng)
    return SampledModel(trans, reward, posterior.reward_values)


def _sample_index(counts, rng) -> int:
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total <= 0.0:
        return int(rng.integers(counts.shape[0]))
    return int(rng.choice(counts.shape[0], p=counts / total))


def _dirichlet_table(theta, rng) -> np.ndarray:
    g = rng.standard_gamma(theta)
    total = g.sum(axis=0, keepdims=True)
    bad = total == 0.0
    if np.any(bad):
        g = np.where(np.broadcast_to(bad, g.shape), theta, g)
        total = g.sum(axis=0, keepdims=True)
    return g / total


def ats_decide(belief, posterior: PlanningPosterior, gamma,
               rng: np.random.Generator, tol=1e-6, max_iter=10_000, q_init=None):
    """One Thompson decision; returns (action, solved Q table).

    The Q table is handed back so callers can warm-start the next solve.
    """
    belief = np.asarray(belief, dtype=float)
    total = belief.sum()
    if total <= 0.0 or np.any(belief < 0.0):
        raise ValueError("belief must be a nonnegative vector with positive mass")
    model = sample_model(posterior, rng)
    q = solve_q(model.trans, model.expected_reward(), gamma, tol=tol, q_init=q_init)
    scores = (belief / total) @ q
    best = scores.max()
    ties = np.flatnonzero(scores >= best - _TIE_EPS * (1.0 + abs(best)))
    action = int(ties[0]) if ties.size == 1 else int(rng.choice(ties))
    return action, q


def ats_select_action(belief, posterior: PlanningPosterior, gamma,
                      rng: np.random.Generator, tol=1e-6, max_iter=10_000) -> int:
    """Action-value Thompson Sampling action choice."""
    action, _ = ats_decide(belief, posterior, gamma, rng, tol=tol, max_iter=max_iter)
    return action
