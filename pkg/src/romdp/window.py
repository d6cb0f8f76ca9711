"""Windowed experience buffers and the shared forward-chain step."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDistributionError


@dataclass
class WindowData:
    """The last T steps of experience, aligned so index t carries the
    observation o_t, the reward r_t generated in the same state, and the
    action a_{t-1} that led into that state.
    """

    observations: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray

    def __post_init__(self):
        self.observations = np.asarray(self.observations, dtype=int)
        self.actions = np.asarray(self.actions, dtype=int)
        self.rewards = np.asarray(self.rewards, dtype=int)
        n = self.observations.shape[0]
        if n == 0:
            raise ValueError("window must contain at least one step")
        if self.actions.shape[0] != n or self.rewards.shape[0] != n:
            raise ValueError("observations, actions and rewards must have equal length")
        if np.any(self.observations < 0):
            raise ValueError("observation indices must be nonnegative")
        if np.any((self.actions < 0) | (self.actions > 1)):
            raise ValueError("actions must be 0 or 1")
        if np.any((self.rewards < 0) | (self.rewards > 1)):
            raise ValueError("rewards must be 0 or 1")

    def __len__(self) -> int:
        return self.observations.shape[0]


def chain_step(score: np.ndarray, prev: np.ndarray):
    """One forward step of the variational chain.

    ``score[i, j]`` is the summed expected-log score of moving from state
    j to state i at this step; ``prev`` is q(s_{t-1}).  Returns the joint
    q(s_t, s_{t-1}), the marginal q(s_t) and the log-partition
    contribution sum_j prev[j] * ln Z(j).
    """
    colmax = score.max(axis=0)
    if not np.isfinite(colmax).all():
        raise DegenerateDistributionError("a chain column lost all probability mass")
    w = np.exp(score - colmax)
    z = w.sum(axis=0)
    joint = (w / z) * prev
    marginal = joint.sum(axis=1)
    ll = float(prev @ (colmax + np.log(z)))
    return joint, marginal, ll
