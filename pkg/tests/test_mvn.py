import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cnmix.errors import NotPositiveDefiniteError
from cnmix.mvn import (LOG_2PI, ContaminationParams, GaussianParams, dcn, log_dcn, log_dmvnorm,
                       mahalanobis_sq, rcn, sample_mvnorm)


def random_spd(rng, p):
    A = rng.normal(size=(p, p))
    return A @ A.T + p * np.eye(p)


# --- mahalanobis_sq --------------------------------------------------------

def test_distance_at_centre_is_zero():
    rng = np.random.default_rng(0)
    mu = rng.normal(size=3)
    assert mahalanobis_sq(mu, mu, random_spd(rng, 3)) == 0.0


def test_identity_metric():
    assert mahalanobis_sq([1.0, 0.0], [0.0, 0.0], np.eye(2)) == pytest.approx(1.0)


def test_diagonal_metric():
    assert mahalanobis_sq([1.0, 2.0], [0.0, 0.0], np.diag([4.0, 1.0])) == pytest.approx(4.25)


def test_matrix_input_gives_one_distance_per_row():
    X = np.array([[1.0, 0.0], [0.0, 2.0], [1.0, 2.0]])
    np.testing.assert_allclose(mahalanobis_sq(X, [0.0, 0.0], np.diag([4.0, 1.0])), [0.25, 4.0, 4.25])


def test_non_spd_is_reported_with_the_matrix():
    bad = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(NotPositiveDefiniteError) as info:
        mahalanobis_sq([0.0, 0.0], [0.0, 0.0], bad)
    np.testing.assert_array_equal(info.value.matrix, bad)


def test_affine_invariance():
    rng = np.random.default_rng(1)
    for _ in range(20):
        p = rng.integers(2, 6)
        x, mu, b = rng.normal(size=(3, p))
        S = random_spd(rng, p)
        A = rng.normal(size=(p, p)) + 2 * np.eye(p)
        before = mahalanobis_sq(x, mu, S)
        after = mahalanobis_sq(A @ x + b, A @ mu + b, A @ S @ A.T)
        assert after == pytest.approx(before, rel=1e-8, abs=1e-8)


# --- log_dmvnorm -----------------------------------------------------------

def test_standard_normal_at_zero():
    assert log_dmvnorm([0.0], [0.0], [[1.0]]) == pytest.approx(-0.9189385, abs=1e-7)


def test_bivariate_at_centre():
    assert log_dmvnorm([0.0, 0.0], [0.0, 0.0], np.eye(2)) == pytest.approx(-1.8378771, abs=1e-7)


def test_bivariate_closed_form():
    expected = -np.log(2 * np.pi) - np.log(2.0) - 0.5
    assert log_dmvnorm([1.0, 1.0], [0.0, 0.0], 2 * np.eye(2)) == pytest.approx(expected, abs=1e-12)


def test_log_dmvnorm_matches_scipy():
    from scipy.stats import multivariate_normal
    rng = np.random.default_rng(2)
    S = random_spd(rng, 4)
    mu = rng.normal(size=4)
    X = rng.normal(size=(50, 4))
    np.testing.assert_allclose(log_dmvnorm(X, mu, S), multivariate_normal(mu, S).logpdf(X), rtol=1e-12)


# --- contaminated density --------------------------------------------------

def test_params_validation():
    with pytest.raises(ValueError):
        ContaminationParams(1.0, 2.0)
    with pytest.raises(ValueError):
        ContaminationParams(0.5, 1.0)
    with pytest.raises(ValueError):
        GaussianParams(np.zeros(2), np.eye(3))
    with pytest.raises(NotPositiveDefiniteError):
        GaussianParams(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_alpha_one_limit_is_gaussian():
    rng = np.random.default_rng(3)
    S = random_spd(rng, 3)
    mu = rng.normal(size=3)
    X = rng.normal(size=(20, 3)) * 3
    got = log_dcn(X, GaussianParams(mu, S), ContaminationParams(1 - 1e-12, 50.0))
    np.testing.assert_allclose(got, log_dmvnorm(X, mu, S), atol=1e-8)


def test_eta_one_limit_is_gaussian():
    rng = np.random.default_rng(4)
    S = random_spd(rng, 2)
    X = rng.normal(size=(20, 2))
    for alpha in (0.05, 0.5, 0.95):
        got = log_dcn(X, GaussianParams(np.zeros(2), S), ContaminationParams(alpha, 1 + 1e-12))
        np.testing.assert_allclose(got, log_dmvnorm(X, np.zeros(2), S), atol=1e-8)


def test_two_term_value_at_origin():
    expected = np.log(0.9 / (2 * np.pi) + 0.1 / (2 * np.pi * 10))
    got = log_dcn([0.0, 0.0], GaussianParams(np.zeros(2), np.eye(2)), ContaminationParams(0.9, 10.0))
    assert got == pytest.approx(expected, abs=1e-14)


def test_far_tail_stays_finite():
    got = log_dcn([1e4, 1e4], GaussianParams(np.zeros(2), np.eye(2)), ContaminationParams(0.99, 1000.0))
    assert np.isfinite(got)
    expected = np.log(0.01) - LOG_2PI - np.log(1000.0) - 0.5 * 2e8 / 1000.0
    assert got == pytest.approx(expected, rel=1e-12)


@given(alpha=st.floats(0.01, 0.99), eta=st.floats(1.01, 500.0),
       x=st.lists(st.floats(-30, 30), min_size=2, max_size=2))
@settings(max_examples=100, deadline=None)
def test_log_sum_exp_lower_bounds(alpha, eta, x):
    S = np.array([[2.0, 0.3], [0.3, 1.0]])
    mu = np.array([0.5, -1.0])
    val = log_dcn(np.array(x), GaussianParams(mu, S), ContaminationParams(alpha, eta))
    assert val >= np.log(alpha) + log_dmvnorm(np.array(x), mu, S) - 1e-12
    assert val >= np.log1p(-alpha) + log_dmvnorm(np.array(x), mu, eta * S) - 1e-12


def test_elliptical_symmetry():
    S = np.array([[3.0, 1.0], [1.0, 2.0]])
    mu = np.array([1.0, -2.0])
    L = np.linalg.cholesky(S)
    u = np.array([[np.cos(t), np.sin(t)] for t in (0.3, 2.1)]) * 1.7
    X = mu + u @ L.T
    d = mahalanobis_sq(X, mu, S)
    assert d[0] == pytest.approx(d[1])
    vals = log_dcn(X, GaussianParams(mu, S), ContaminationParams(0.7, 20.0))
    assert vals[0] == pytest.approx(vals[1], abs=1e-12)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_density_integrates_to_one(p):
    # Importance sampling from a normal wider than both parts.
    rng = np.random.default_rng(10 + p)
    S = random_spd(rng, p)
    mu = rng.normal(size=p)
    gauss, cont = GaussianParams(mu, S), ContaminationParams(0.8, 6.0)
    prop = 1.5 * cont.eta * S
    Y = sample_mvnorm(100_000, mu, prop, rng)
    w = np.exp(log_dcn(Y, gauss, cont) - log_dmvnorm(Y, mu, prop))
    assert w.mean() == pytest.approx(1.0, rel=0.01)


def test_dcn_is_exp_of_log():
    g, c = GaussianParams(np.zeros(2), np.eye(2)), ContaminationParams(0.9, 5.0)
    X = np.array([[0.0, 0.0], [1.0, -1.0]])
    np.testing.assert_allclose(dcn(X, g, c), np.exp(log_dcn(X, g, c)))


# --- rcn ---------------------------------------------------------------------

def test_rcn_alpha_near_one_all_good():
    _, good = rcn(1000, GaussianParams(np.zeros(2), np.eye(2)), ContaminationParams(1 - 1e-12, 10.0), 0)
    assert good.all()


def test_rcn_good_fraction():
    _, good = rcn(100_000, GaussianParams(np.zeros(2), np.eye(2)), ContaminationParams(0.9, 10.0), 1)
    assert 0.885 <= good.mean() <= 0.915


def test_rcn_mean_within_clt_bound():
    mu = np.array([1.0, -3.0])
    S = np.array([[2.0, 0.5], [0.5, 1.0]])
    alpha, eta, n = 0.9, 10.0, 100_000
    X, _ = rcn(n, GaussianParams(mu, S), ContaminationParams(alpha, eta), 2)
    sd = np.sqrt(np.diag((alpha + (1 - alpha) * eta) * S))
    assert np.all(np.abs(X.mean(axis=0) - mu) <= 4 * sd / np.sqrt(n))


def test_rcn_reproducible():
    g, c = GaussianParams(np.zeros(3), np.eye(3)), ContaminationParams(0.8, 4.0)
    a = rcn(50, g, c, np.random.default_rng(7))
    b = rcn(50, g, c, 7)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_rcn_bad_rows_are_more_spread():
    X, good = rcn(20_000, GaussianParams(np.zeros(2), np.eye(2)), ContaminationParams(0.5, 25.0), 3)
    assert X[~good].var(axis=0) == pytest.approx([25.0, 25.0], rel=0.1)
    assert X[good].var(axis=0) == pytest.approx([1.0, 1.0], rel=0.1)
