import numpy as np
import pytest

from romdp.metrics import JointCounts, accumulate, conditional_entropy, optimal_rate


class TestConditionalEntropy:
    def test_identity_joint_is_zero(self):
        assert conditional_entropy(np.eye(4) * 25.0) == pytest.approx(0.0, abs=1e-12)

    def test_single_state_uniform_observations(self):
        table = np.ones((64, 1))
        assert conditional_entropy(table) == pytest.approx(np.log(64), abs=1e-12)

    def test_core_states_with_uniform_noise(self):
        # states match cores exactly; each core emits 16 equally likely
        # observation patterns, so H(o|s) is four fair bits
        table = np.zeros((64, 4))
        for core in range(4):
            table[core * 16:(core + 1) * 16, core] = 1.0
        assert conditional_entropy(table) == pytest.approx(4 * np.log(2), abs=1e-12)

    def test_bounds(self):
        rng = np.random.default_rng(0)
        for _ in range(20)           :
            table = rng.uniform(0.0, 5.0, (4, 6))
            h = conditional_entropy(table)
            assert 0.0 <= h <= np.log(4) + 1e-12

    def test_observation_entropy_dominates_core_entropy(self):
        # cores are a deterministic function of observations (obs // 16),
        # so conditioning on any state estimate loses at least as much
        # observation information as core information
        rng = np.random.default_rng(4)
        for _ in range(10):
            counts = JointCounts(4, 64, 6)
            for _ in range(200):
                obs = int(rng.integers(64))
                accumulate(counts, obs // 16, obs, rng.dirichlet(np.ones(6)))
            assert (conditional_entropy(counts.os_counts)
                    >= conditional_entropy(counts.cs_counts) - 1e-12)

    def test_state_relabeling_invariance(self):
        rng = np.random.default_rng(1)
        table = rng.uniform(0.0, 3.0, (5, 7))
        perm = rng.permutation(7)
        assert conditional_entropy(table) == pytest.approx(
            conditional_entropy(table[:, perm]), abs=1e-12)

    def test_zero_mass_rejected(self):
        with pytest.raises(ValueError):
            conditional_entropy(np.zeros((3, 3)))


class TestJointCounts:
    def test_delta_beliefs_give_integer_counts(self):
        counts = JointCounts(4, 8, 3)
        for core, obs, state in [(0, 1, 2), (0, 1, 2), (3, 7, 0)]:
            belief = np.zeros(3)
            belief[state] = 1.0
            accumulate(counts, core, obs, belief)
        assert counts.cs_counts[0, 2] == 2.0
        assert counts.os_counts[7, 0] == 1.0
        assert counts.steps == 3

    def test_uniform_belief_spreads_mass(self):
        counts = JointCounts(4, 8, 4)
        accumulate(counts, 1, 3, np.full(4, 0.25))
        assert np.allclose(counts.cs_counts[1], 0.25)

    def test_total_mass_equals_steps(self):
        rng = np.random.default_rng(2)
        counts = JointCounts(4, 8, 5)
        n = 37
        for _ in range(n):
            b = rng.dirichlet(np.ones(5))
            accumulate(counts, int(rng.integers(4)), int(rng.integers(8)), b)
        assert counts.cs_counts.sum() == pytest.approx(n, abs=1e-9)
        assert counts.os_counts.sum() == pytest.approx(n, abs=1e-9)

    def test_invalid_belief_rejected(self):
        counts = JointCounts(4, 8, 3)
        with pytest.raises(ValueError):
            accumulate(counts, 0, 0, np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            accumulate(counts, 0, 0, np.array([-0.1, 0.6, 0.5]))


class TestOptimalRate:
    SETS = [frozenset({0}), frozenset({1}), frozenset({1}), frozenset({0})]

    def test_oracle_agent(self):
        cores = [0, 1, 2, 3, 2, 1]
        acts = [0, 1, 1, 0, 1, 1]
        assert optimal_rate(cores, acts, self.SETS) == 1.0

    def test_anti_oracle_agent(self):
        cores = [0, 1, 2, 3]
        acts = [1, 0, 0, 1]
        assert optimal_rate(cores, acts, self.SETS) == 0.0

    def test_random_agent_near_half(self):
        rng = np.random.default_rng(3)
        cores = rng.integers(0, 4, 4000)
        acts = rng.integers(0, 2, 4000)
        assert abs(optimal_rate(cores, acts, self.SETS) - 0.5) < 0.05

    def test_ties_count_as_optimal(self):
        sets = [frozenset({0, 1})] + self.SETS[1:]
        assert optimal_rate([0, 0], [0, 1], sets) == 1.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            optimal_rate([], [], self.SETS)
