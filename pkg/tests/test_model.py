import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rankmoments.errors import DomainError
from rankmoments.model import (
    Ranking,
    UniformCorrelationModel,
    apply_ranking,
    covariance_matrix,
    extract_ranking,
    one_factor_sample,
)


def test_invariants():
    with pytest.raises(DomainError):
        UniformCorrelationModel([0.0], [1.0], 0.0)
    with pytest.raises(DomainError):
        UniformCorrelationModel([0, 0], [1, 0], 0.0)
    with pytest.raises(DomainError):
        UniformCorrelationModel([0, 0], [1, 1], -0.1)
    with pytest.raises(DomainError):
        UniformCorrelationModel([0, 0], [1, 1], 1.01)
    with pytest.raises(DomainError):
        UniformCorrelationModel([0, 0, 0], [1, 1], 0.2)
    assert UniformCorrelationModel.standard(4, 0.3).is_standard()
    assert not UniformCorrelationModel([0, 1], [1, 1], 0.3).is_standard()


def test_model_is_immutable():
    m = UniformCorrelationModel.standard(3, 0.2)
    with pytest.raises(ValueError):
        m.mu[0] = 1.0


def test_covariance_matrix():
    np.testing.assert_allclose(covariance_matrix(UniformCorrelationModel([0, 0], [1, 1], 0.5)), [[1, 0.5], [0.5, 1]])
    np.testing.assert_allclose(covariance_matrix(UniformCorrelationModel.standard(3, 0.0)), np.eye(3))
    np.testing.assert_allclose(covariance_matrix(UniformCorrelationModel([0, 0], [2, 3], 0.25)), [[4, 1.5], [1.5, 9]])


def test_covariance_is_psd(rng):
    for _ in range(20):
        n = rng.integers(2, 8)
        m = UniformCorrelationModel(rng.normal(size=n), rng.uniform(0.1, 3, n), rng.uniform(0, 1))
        assert np.linalg.eigvalsh(covariance_matrix(m)).min() > -1e-12


def test_sample_rho_one_is_constant(rng):
    x = one_factor_sample(UniformCorrelationModel.standard(6, 1.0), rng)
    assert np.ptp(x) == 0.0


def test_sample_mean_clt(rng):
    n = 4
    m = UniformCorrelationModel(np.full(n, 5.0), np.ones(n), 0.0)
    x = one_factor_sample(m, rng, size=100_000)
    assert np.all(np.abs(x.mean(axis=0) - 5.0) < 4 * 10 ** (-2.5) * np.sqrt(n))


def test_sample_determinism():
    m = UniformCorrelationModel([0, 1, 2], [1, 2, 3], 0.4)
    a = one_factor_sample(m, np.random.default_rng(7))
    b = one_factor_sample(m, np.random.default_rng(7))
    assert np.array_equal(a, b)


def test_sample_covariance_matches(rng):
    m = UniformCorrelationModel([0.0, 1.0, -1.0], [1.0, 2.0, 0.5], 0.3)
    n_draws = 100_000
    x = one_factor_sample(m, rng, size=n_draws)
    cov = covariance_matrix(m)
    emp = np.cov(x, rowvar=False)
    # SE of a sample covariance for Gaussians: sqrt((s_ii s_jj + s_ij^2) / N)
    se = np.sqrt((np.outer(np.diag(cov), np.diag(cov)) + cov**2) / n_draws)
    assert np.all(np.abs(emp - cov) < 5 * se)


def test_extract_ranking():
    assert extract_ranking([0.3, -1.2, 0.7]).order == (1, 0, 2)
    assert extract_ranking([1, 1, 0]).order == (2, 0, 1)
    assert extract_ranking([1, 2, 3, 4]).is_identity()


def test_extract_ranking_of_samples_is_permutation(rng):
    m = UniformCorrelationModel.standard(7, 0.5)
    for x in one_factor_sample(m, rng, size=50):
        r = extract_ranking(x)
        assert sorted(r.order) == list(range(7))
        assert np.all(np.diff(x[list(r.order)]) >= 0)


def test_ranking_validation():
    with pytest.raises(DomainError):
        Ranking((0, 0, 1))
    with pytest.raises(DomainError):
        Ranking((1, 2, 3))


def test_apply_ranking():
    m = UniformCorrelationModel([1.0, 2.0], [1.0, 3.0], 0.2)
    assert apply_ranking(m, Ranking.identity(2)) == m
    swapped = apply_ranking(m, Ranking((1, 0)))
    np.testing.assert_array_equal(swapped.mu, [2.0, 1.0])
    np.testing.assert_array_equal(swapped.sigma, [3.0, 1.0])
    with pytest.raises(DomainError):
        apply_ranking(m, Ranking.identity(3))


@settings(max_examples=50, deadline=None)
@given(st.permutations(range(6)), st.floats(0, 1))
def test_apply_ranking_round_trip_and_covariance(perm, rho):
    rng = np.random.default_rng(len(perm))
    m = UniformCorrelationModel(rng.normal(size=6), rng.uniform(0.5, 2, 6), rho)
    r = Ranking(tuple(perm))
    permuted = apply_ranking(m, r)
    assert apply_ranking(permuted, r.inverse()) == m
    P = np.eye(6)[list(perm)]
    np.testing.assert_allclose(covariance_matrix(permuted), P @ covariance_matrix(m) @ P.T, rtol=0, atol=1e-14)
