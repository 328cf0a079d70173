import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gitfl.params import Repository
from gitfl.version_control import merge_master, model_pull, model_push, pull_weight, version_ctrl

versions_st = st.lists(st.integers(0, 200), min_size=1, max_size=16)


class TestMerge:
    def test_single_branch(self):
        assert merge_master([np.array([7.0])], [5]).tolist() == [7.0]

    def test_version_weighted(self):
        assert merge_master([np.array([2.0]), np.array([6.0])], [1, 3]).tolist() == [5.0]

    def test_zero_versions_fall_back_to_uniform_mean(self):
        assert merge_master([np.array([2.0]), np.array([6.0])], [0, 0]).tolist() == [4.0]

    def test_zero_weight_branch_is_ignored(self):
        out = merge_master([np.array([2.0]), np.array([100.0])], [3, 0])
        assert out.tolist() == [2.0]

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            merge_master([np.zeros(1)], [1, 2])


class TestVersionCtrl:
    def test_equal_versions(self):
        assert version_ctrl(1, [4, 4, 4]) == 0

    def test_above_and_below_mean(self):
        assert version_ctrl(2, [1, 3, 5]) == 2.0
        assert version_ctrl(0, [1, 3, 5]) == -2.0

    def test_fractional(self):
        assert version_ctrl(0, [1, 2]) == -0.5

    @settings(max_examples=300)
    @given(versions_st)
    def test_sums_to_zero(self, versions):
        total = sum(version_ctrl(i, versions) for i in range(len(versions)))
        assert abs(total) <= 1e-9


class TestPull:
    def test_identical_models_unchanged(self):
        m = np.array([1.5, -2.0, 3.0])
        for versions in ([0, 0], [100, 0], [0, 100]):
            np.testing.assert_allclose(model_pull(0, versions, m, m.copy()), m, rtol=0, atol=1e-15)

    def test_neutral_version(self):
        # w = max(10, 2) = 10 -> (10*0 + 11) / 11
        out = model_pull(0, [3, 3], np.array([11.0]), np.array([0.0]))
        assert out.tolist() == [1.0]

    def test_clamped_weight(self):
        # branch 0 is 20 behind the mean -> w = max(10 - 20, 2) = 2 -> (2*3 + 0) / 3
        versions = [0, 40]
        assert version_ctrl(0, versions) == -20
        out = model_pull(0, versions, np.array([0.0]), np.array([3.0]))
        assert out.tolist() == [2.0]

    def test_base_weight_knob(self):
        assert pull_weight(0, [0, 0], base_weight=4.0) == 4.0
        assert pull_weight(0, [0, 10], base_weight=4.0) == 2.0

    @settings(max_examples=300)
    @given(versions_st, st.data(), st.floats(-100, 100), st.floats(-100, 100))
    def test_master_share_bounded_and_output_between(self, versions, data, b, m):
        i = data.draw(st.integers(0, len(versions) - 1))
        w = pull_weight(i, versions)
        assert 1.0 / (w + 1.0) <= 1.0 / 3.0
        out = model_pull(i, versions, np.array([m]), np.array([b]))[0]
        assert min(b, m) - 1e-9 <= out <= max(b, m) + 1e-9


class TestPush:
    def test_version_three_becomes_four(self):
        repo = Repository(np.zeros(2), 3)
        repo[2].version = 3
        model_push(repo, 2, np.ones(2))
        assert repo[2].version == 4

    def test_consecutive_pushes(self):
        repo = Repository(np.zeros(2), 2)
        model_push(repo, 0, np.array([1.0, 1.0]))
        model_push(repo, 0, np.array([2.0, 3.0]))
        assert repo[0].version == 2
        assert repo[0].params.tolist() == [2.0, 3.0]

    def test_other_branches_untouched(self):
        repo = Repository(np.zeros(2), 3)
        before = [(b.params.copy(), b.version) for b in repo.branches]
        model_push(repo, 1, np.ones(2))
        for k in (0, 2):
            assert repo[k].version == before[k][1]
            np.testing.assert_array_equal(repo[k].params, before[k][0])

    def test_push_all_once_gives_uniform_master(self):
        rng = np.random.default_rng(0)
        repo = Repository(np.zeros(4), 5)
        pushed = [rng.normal(size=4) for _ in range(5)]
        for k, p in enumerate(pushed):
            model_push(repo, k, p)
        np.testing.assert_allclose(merge_master(repo.params(), repo.versions), np.mean(pushed, axis=0), rtol=1e-12)
