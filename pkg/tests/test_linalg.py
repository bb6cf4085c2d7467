import numpy as np
import pytest

from metafl.linalg import l2_norm, mean_vectors, project_to_ball


def test_l2_norm_zero_vector():
    assert l2_norm(np.zeros(3)) == 0.0


def test_l2_norm_345():
    assert l2_norm(np.array([3.0, 4.0])) == pytest.approx(5.0)


def test_l2_norm_matches_naive_loop_oracle():
    rng = np.random.default_rng(42)
    v = rng.normal(size=16)
    acc = 0.0
    for x in v:
        acc += x * x
    assert l2_norm(v) == pytest.approx(acc ** 0.5, abs=1e-12)


def test_l2_norm_rejects_nonfinite():
    with pytest.raises(ValueError):
        l2_norm(np.array([1.0, np.nan]))
    with pytest.raises(ValueError):
        l2_norm(np.array([np.inf, 0.0]))


def test_l2_norm_absolute_homogeneity():
    rng = np.random.default_rng(0)
    v = rng.normal(size=10)
    for a in (-3.5, 0.0, 0.25, 7.0):
        assert l2_norm(a * v) == pytest.approx(abs(a) * l2_norm(v), abs=1e-12)


def test_mean_vectors_simple():
    out = mean_vectors([np.array([1.0, 1.0]), np.array([3.0, 3.0])])
    np.testing.assert_allclose(out, [2.0, 2.0])


def test_mean_vectors_singleton_identity():
    v = np.array([1.5, -2.0, 0.0])
    np.testing.assert_array_equal(mean_vectors([v]), v)


def test_mean_vectors_matches_scalar_oracle():
    rng = np.random.default_rng(7)
    vs = [rng.normal(size=6) for _ in range(5)]
    out = mean_vectors(vs)
    for j in range(6):
        expected = sum(v[j] for v in vs) / 5.0
        assert out[j] == pytest.approx(expected, abs=1e-12)


def test_mean_vectors_permutation_invariant():
    rng = np.random.default_rng(3)
    vs = [rng.normal(size=4) for _ in range(6)]
    np.testing.assert_allclose(mean_vectors(vs), mean_vectors(vs[::-1]), atol=1e-15)


def test_mean_vectors_errors():
    with pytest.raises(ValueError):
        mean_vectors([])
    with pytest.raises(ValueError):
        mean_vectors([np.zeros(2), np.zeros(3)])


def test_project_inside_ball_unchanged():
    v = np.array([0.3, 0.4])  # norm 0.5
    np.testing.assert_array_equal(project_to_ball(v, 1.0), v)


def test_project_scales_to_boundary():
    np.testing.assert_allclose(project_to_ball(np.array([6.0, 8.0]), 5.0), [3.0, 4.0])


def test_project_result_norm_bounded():
    rng = np.random.default_rng(11)
    for _ in range(20):
        v = rng.normal(size=8) * rng.uniform(0.1, 50)
        assert l2_norm(project_to_ball(v, 1.0)) <= 1.0 + 1e-9


def test_project_idempotent():
    rng = np.random.default_rng(5)
    v = rng.normal(size=8) * 10
    once = project_to_ball(v, 2.0)
    np.testing.assert_allclose(project_to_ball(once, 2.0), once, atol=1e-12)


def test_project_rejects_nonpositive_radius():
    with pytest.raises(ValueError):
        project_to_ball(np.ones(2), 0.0)
    with pytest.raises(ValueError):
        project_to_ball(np.ones(2), -1.0)
