"""Evaluation metrics: conditional entropies of the estimated state and
the optimal-behaviour rate.

Joint tables are belief-weighted soft counts accumulated over one
reporting window; entropies are in nats.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class JointCounts:
    """Soft joint counts p(core, state) and p(observation, state)."""

    n_cores: int
    n_obs: int
    n_states: int
    cs_counts: np.ndarray = field(init=False)
    os_counts: np.ndarray = field(init=False)
    steps: int = field(init=False, default=0)

    def __post_init__(self):
        self.cs_counts = np.zeros((self.n_cores, self.n_states))
        self.os_counts = np.zeros((self.n_obs, self.n_states))

    def accumulate(self, true_core: int, observation: int, belief: np.ndarray):
        belief = np.asarray(belief, dtype=float)
        if belief.shape[0] != self.n_states or np.any(belief < 0.0):
            raise ValueError("belief must be a nonnegative vector over the state axis")
        self.cs_counts[true_core] += belief
        self.os_counts[observation] += belief
        self.steps += 1


def accumulate(counts: JointCounts, true_core: int, observation: int,
               belief: np.ndarray) -> JointCounts:
    counts.accumulate(true_core, observation, belief)
    return counts


def conditional_entropy(table: np.ndarray) -> float:
    """H(x | s) in nats from a joint count table [x, s]; 0 ln 0 := 0."""
    table = np.asarray(table, dtype=float)
    total = table.sum()
    if total <= 0.0:
        raise ValueError("count table has no mass")
    joint = table / total
    col = joint.sum(axis=0, keepdims=True)
    mask = joint > 0.0
    ln_joint = np.zeros_like(joint)
    np.log(joint, out=ln_joint, where=mask)
    ln_col = np.zeros_like(col)
    np.log(col, out=ln_col, where=col > 0.0)
    return float(-(joint * (ln_joint - ln_col))[mask].sum())


def optimal_rate(true_cores, actions, optimal_sets) -> float:
    """Fraction of steps whose action is optimal for the true core under
    the currently active rules; ``optimal_sets`` holds per-core frozensets
    so exactly tied actions all count as optimal.
    """
    true_cores = np.asarray(true_cores, dtype=int)
    actions = np.asarray(actions, dtype=int)
    if true_cores.shape != actions.shape or true_cores.size == 0:
        raise ValueError("need equal-length nonempty core and action sequences")
    hits = sum(1 for c, a in zip(true_cores, actions) if a in optimal_sets[c])
    return hits / true_cores.size
