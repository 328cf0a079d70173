import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gitfl.selector import (
    ClientStats,
    Variant,
    combined_reward,
    curiosity_reward,
    normalize,
    record_completion,
    rewards,
    select_client,
    selection_probabilities,
    version_reward,
)


def make_stats(times, counts=None):
    stats = ClientStats(len(times))
    stats.time_table[:] = times
    if counts is not None:
        stats.count_table[:] = counts
    return stats


class TestVersionReward:
    def test_worked_example(self):
        stats = make_stats([100.0, 300.0])
        assert version_reward(1, 1, [2, 4], stats) == pytest.approx(1 / 3, rel=1e-12)
        assert version_reward(1, 0, [2, 4], stats) == pytest.approx(-1 / 3, rel=1e-12)

    def test_average_version_is_time_independent(self):
        stats = make_stats([100.0, 250.0, 900.0])
        for c in range(3):
            assert version_reward(c, 1, [2, 3, 4], stats) == 0.0

    def test_cold_start_is_zero(self):
        stats = make_stats([0.0, 0.0, 0.0])
        for c in range(3):
            assert version_reward(c, 0, [5, 0, 0], stats) == 0.0

    def test_mean_includes_unobserved_clients(self):
        # mean over all three clients is 100, max 300
        stats = make_stats([0.0, 0.0, 300.0])
        assert version_reward(2, 1, [0, 2], stats) == pytest.approx(1.0 * (300 - 100) / 300)


class TestCuriosityReward:
    @pytest.mark.parametrize("count, expected", [(0, 1.0), (1, 1.0), (4, 0.5), (100, 0.1)])
    def test_values(self, count, expected):
        stats = make_stats([0.0], [count])
        assert curiosity_reward(0, stats) == pytest.approx(expected, rel=1e-15)


class TestCombinedReward:
    def test_clamped_at_zero(self):
        # offset -4, time term (100 - 50) / 100 -> version reward -2; curiosity 1/sqrt(4)
        stats = make_stats([0.0, 100.0], [4, 4])
        assert version_reward(1, 0, [0, 8], stats) == pytest.approx(-2.0)
        assert curiosity_reward(1, stats) == 0.5
        assert combined_reward(1, 0, [0, 8], stats) == 0.0

    def test_sum_when_positive(self):
        stats = make_stats([100.0, 300.0], [4, 4])
        assert combined_reward(1, 1, [2, 4], stats) == pytest.approx(1 / 3 + 0.5, rel=1e-12)

    def test_neutral_version_gives_curiosity(self):
        stats = make_stats([100.0, 300.0], [0, 0])
        assert combined_reward(0, 0, [3, 3], stats) == 1.0


class TestProbabilities:
    def test_normalization(self):
        np.testing.assert_allclose(normalize(np.array([1.0, 3.0]), [0, 1]), [0.25, 0.75])

    def test_single_eligible(self):
        assert normalize(np.array([0.0, 0.7, 0.2]), [1]).tolist() == [0.0, 1.0, 0.0]
        assert normalize(np.array([0.0, 0.0]), [0]).tolist() == [1.0, 0.0]

    def test_all_zero_falls_back_to_uniform(self):
        assert normalize(np.zeros(4), range(4)).tolist() == [0.25] * 4

    def test_empty_eligible(self):
        with pytest.raises(RuntimeError):
            normalize(np.ones(2), [])

    def test_busy_clients_excluded(self):
        stats = make_stats([0.0] * 4)
        stats.busy = {1, 3}
        probs = selection_probabilities(0, [0], stats)
        assert probs.tolist() == [0.5, 0.0, 0.5, 0.0]

    @settings(max_examples=300)
    @given(st.lists(st.floats(0, 100), min_size=1, max_size=20), st.floats(1e-3, 1e3))
    def test_probability_law_and_scale_invariance(self, reward, scale):
        reward = np.array(reward)
        p = normalize(reward, range(len(reward)))
        assert np.all(p >= 0)
        assert abs(p.sum() - 1.0) <= 1e-12
        np.testing.assert_allclose(normalize(reward * scale, range(len(reward))), p, rtol=1e-12, atol=1e-15)
        if reward.sum() > 0:
            assert np.all(p[reward == 0] == 0)


class TestSelect:
    def test_degenerate_distribution(self):
        rng = np.random.default_rng(0)
        stats = make_stats([100.0, 300.0, 100.0], [1, 1, 1])
        for _ in range(200):
            stats.busy.clear()
            # branch 1 is far above average: only the slow client 1 has positive reward
            assert select_client(1, [0, 30], stats, rng, Variant.V) == 1

    def test_marks_busy(self):
        stats = make_stats([0.0] * 3)
        c = select_client(0, [0], stats, np.random.default_rng(1))
        assert stats.busy == {c}

    @pytest.mark.parametrize("variant, counts, expected", [
        (Variant.R, [0] * 10, [0.1] * 10),
        # curiosity 1/sqrt(9) and 1/sqrt(1) -> rewards 1:3; single branch keeps the version term at 0
        (Variant.CV, [9, 1], [0.25, 0.75]),
    ])
    def test_frequencies_within_three_sigma(self, variant, counts, expected):
        n = 100_000
        stats = make_stats([0.0] * len(counts), counts)
        rng = np.random.default_rng(2024)
        hits = np.zeros(len(expected))
        for _ in range(n):
            hits[select_client(0, [0], stats, rng, variant)] += 1
            stats.busy.clear()
        for f, p in zip(hits / n, expected):
            assert abs(f - p) <= 3 * math.sqrt(p * (1 - p) / n)

    def test_curiosity_only_ignores_versions(self):
        stats = make_stats([100.0, 500.0], [1, 4])
        assert rewards(0, [0, 50], stats, Variant.C).tolist() == [1.0, 0.5]


class TestRecordCompletion:
    def test_running_mean(self):
        stats = ClientStats(1)
        stats.busy.add(0)
        record_completion(0, 100.0, stats)
        assert stats.time_table[0] == 100.0
        stats.busy.add(0)
        record_completion(0, 200.0, stats)
        assert stats.time_table[0] == 150.0
        assert stats.count_table[0] == 2
        assert stats.busy == set()

    def test_exact_mean_of_three(self):
        stats = ClientStats(2)
        for t in (50.0, 150.0, 250.0):
            stats.busy.add(1)
            record_completion(1, t, stats)
        assert stats.time_table[1] == 150.0

    def test_idle_client_rejected(self):
        with pytest.raises(RuntimeError):
            record_completion(0, 1.0, ClientStats(1))

    def test_double_busy_rejected(self):
        stats = ClientStats(2)
        stats.mark_busy(0)
        with pytest.raises(RuntimeError):
            stats.mark_busy(0)
