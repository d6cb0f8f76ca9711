"""Redundantly observable MDP test environments.

A 4-state core MDP with binary rewards is wrapped in ``m`` independent
binary noise bits; each observation is the direct product of core index
and noise pattern, so there are ``4 * 2**m`` observations.  Noise bits
never influence rewards or core transitions.  Nonstationarity is injected
by a schedule of rule swaps (reward-rule or transition-rule) applied at
fixed trial counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

N_CORES = 4
N_ACTIONS = 2


class NoiseKind(str, Enum):
    SELF_TRANSITION = "self_transition"
    ACTION_DEPENDENT = "action_dependent"
    REWARD_DEPENDENT = "reward_dependent"


class RuleChange(str, Enum):
    SWAP_REWARD_RULE = "swap_reward_rule"
    SWAP_TRANSITION_RULE = "swap_transition_rule"


@dataclass
class CoreMDP:
    """True core dynamics: transition[s', s, a] and P(r=1 | s)."""

    transition: np.ndarray
    reward_prob: np.ndarray
    reward_values: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0]))

    def __post_init__(self):
        self.transition = np.asarray(self.transition, dtype=float)
        self.reward_prob = np.asarray(self.reward_prob, dtype=float)
        self.reward_values = np.asarray(self.reward_values, dtype=float)
        if self.transition.shape != (N_CORES, N_CORES, N_ACTIONS):
            raise ValueError("transition table must have shape (4, 4, 2)")
        col = self.transition.sum(axis=0)
        if np.max(np.abs(col - 1.0)) > 1e-12:
            raise ValueError("transition columns must sum to 1")
        if np.any(self.reward_prob < 0.0) or np.any(self.reward_prob > 1.0):
            raise ValueError("reward probabilities must lie in [0, 1]")

    def copy(self) -> "CoreMDP":
        return CoreMDP(self.transition.copy(), self.reward_prob.copy(), self.reward_values.copy())


def default_core_mdp() -> CoreMDP:
    """The base rule pair: high-reward states c1/c3 (p=0.9), low c0/c2.

    Under a0 the agent rides the c3 self-loop (0.9 stay, rare slip to c2);
    recovering from c2 is quickest through the deterministic a1 chain
    c2 -> c1 -> c0 and then a0 back to c3.
    """
    t = np.zeros((N_CORES, N_CORES, N_ACTIONS))
    # action a0
    t[3, 0, 0] = 1.0
    t[2, 1, 0] = 1.0
    t[3, 2, 0] = 0.1
    t[2, 2, 0] = 0.9
    t[3, 3, 0] = 0.9
    t[2, 3, 0] = 0.1
    # action a1
    t[1, 0, 1] = 1.0
    t[0, 1, 1] = 1.0
    t[1, 2, 1] = 1.0
    t[2, 3, 1] = 1.0
    reward = np.array([0.1, 0.9, 0.1, 0.9])
    return CoreMDP(t, reward)


def swapped_reward_rule(reward_prob: np.ndarray) -> np.ndarray:
    """Complement each core's success probability (an involution)."""
    return 1.0 - np.asarray(reward_prob, dtype=float)


def swapped_transition_rule(transition: np.ndarray) -> np.ndarray:
    """Exchange the two action slices of the transition table."""
    return np.asarray(transition, dtype=float)[:, :, ::-1].copy()


@dataclass
class NoiseModel:
    """Per-bit flip behaviour of the reward-irrelevant observation bits."""

    kind: NoiseKind
    e0: float
    e1: float
    m: int

    def __post_init__(self):
        self.kind = NoiseKind(self.kind)
        if not (0.0 <= self.e0 <= 1.0 and 0.0 <= self.e1 <= 1.0):
            raise ValueError("flip probabilities must lie in [0, 1]")
        if self.m < 0:
            raise ValueError("number of noise bits must be nonnegative")

    def flip_probs(self, bits: np.ndarray, action: int, reward: int) -> np.ndarray:
        if self.kind is NoiseKind.SELF_TRANSITION:
            return np.where(bits == 0, self.e0, self.e1)
        if self.kind is NoiseKind.ACTION_DEPENDENT:
            return np.full(self.m, self.e0 if action == 0 else self.e1)
        return np.full(self.m, self.e0 if reward == 0 else self.e1)


def default_noise_model(kind: NoiseKind, m: int = 4) -> NoiseModel:
    kind = NoiseKind(kind)
    if kind is NoiseKind.SELF_TRANSITION:
        return NoiseModel(kind, 0.1, 0.1, m)
    return NoiseModel(kind, 0.1, 0.9, m)


def encode_obs(core: int, bits) -> int:
    """Observation index: core * 2**m + sum_i bit_i * 2**i."""
    bits = np.asarray(bits, dtype=int)
    m = bits.shape[0]
    return int(core) * (1 << m) + int((bits << np.arange(m)).sum())


def decode_obs(index: int, m: int):
    """Inverse of :func:`encode_obs`."""
    n = N_CORES * (1 << m)
    if not 0 <= index < n:
        raise ValueError(f"observation index {index} outside [0, {n})")
    core, pattern = divmod(int(index), 1 << m)
    bits = (pattern >> np.arange(m)) & 1
    return core, bits


@dataclass
class ScheduleEvent:
    at_trial: int
    change: RuleChange

    def __post_init__(self):
        self.change = RuleChange(self.change)


def periodic_schedule(kind: RuleChange | None, period: int, total_trials: int):
    """Rule swaps at period, 2*period, ... strictly inside the run."""
    if kind is None:
        return []
    kind = RuleChange(kind)
    return [ScheduleEvent(k, kind) for k in range(period, total_trials, period)]


def _expected_reward(core_mdp: CoreMDP) -> np.ndarray:
    p = core_mdp.reward_prob
    return core_mdp.reward_values[0] * (1.0 - p) + core_mdp.reward_values[1] * p


def oracle_policy(core_mdp: CoreMDP, gamma: float) -> np.ndarray:
    """Exact optimal action per core state (ground truth for scoring)."""
    from .planner import greedy_policy

    return greedy_policy(core_mdp.transition, _expected_reward(core_mdp), gamma)


def oracle_action_sets(core_mdp: CoreMDP, gamma: float):
    """Optimal-action sets per core, including exact ties."""
    from .planner import optimal_action_sets

    return optimal_action_sets(core_mdp.transition, _expected_reward(core_mdp), gamma)


class RomdpEnv:
    """Generative environment; one instance per experiment seed.

    Separate random streams drive the core process (rewards plus core
    transitions) and the noise bits, so two environments sharing the core
    stream but differing in the noise stream emit identical (core, reward)
    sequences.
    """

    def __init__(self, core_mdp: CoreMDP, noise: NoiseModel,
                 schedule=(), rng_core=None, rng_noise=None):
        self.base_mdp = core_mdp.copy()
        self.core_mdp = core_mdp.copy()
        self.noise = noise
        self.schedule = sorted((ScheduleEvent(e.at_trial, e.change) for e in schedule),
                               key=lambda e: e.at_trial)
        trials = [e.at_trial for e in self.schedule]
        if any(b <= a for a, b in zip(trials, trials[1:])):
            raise ValueError("schedule trials must be strictly increasing")
        self.rng_core = rng_core if rng_core is not None else np.random.default_rng()
        self.rng_noise = rng_noise if rng_noise is not None else np.random.default_rng()
        self.core = 0
        self.noise_bits = np.zeros(noise.m, dtype=int)
        self.trial_counter = 0
        self._next_event = 0

    @property
    def n_obs(self) -> int:
        return N_CORES * (1 << self.noise.m)

    def observation(self) -> int:
        return encode_obs(self.core, self.noise_bits)

    def step(self, action: int):
        """Advance one trial; returns (observation of the new state, reward).

        Order of events: reward is drawn from the pre-transition core, the
        core then moves, the noise bits flip (seeing the chosen action and
        the drawn reward), and finally any due schedule event fires.
        """
        if action not in (0, 1):
            raise ValueError("action must be 0 or 1")
        reward = int(self.rng_core.random() < self.core_mdp.reward_prob[self.core])
        probs = self.core_mdp.transition[:, self.core, action]
        self.core = int(self.rng_core.choice(N_CORES, p=probs))
        if self.noise.m:
            flips = self.rng_noise.random(self.noise.m) < self.noise.flip_probs(
                self.noise_bits, action, reward)
            self.noise_bits = np.where(flips, 1 - self.noise_bits, self.noise_bits)
        self.trial_counter += 1
        while (self._next_event < len(self.schedule)
               and self.schedule[self._next_event].at_trial <= self.trial_counter):
            self._apply(self.schedule[self._next_event].change)
            self._next_event += 1
        return self.observation(), reward

    def _apply(self, change: RuleChange):
        if change is RuleChange.SWAP_REWARD_RULE:
            self.core_mdp.reward_prob = swapped_reward_rule(self.core_mdp.reward_prob)
        else:
            self.core_mdp.transition = swapped_transition_rule(self.core_mdp.transition)
