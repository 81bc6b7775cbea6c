import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from cnmix.errors import DegenerateFitError
from cnmix.structures import (G1_EQUIVALENCE, MODELS, Scales, ScatterSet, decompose, eigen_sorted,
                              n_sigma_params, objective, reconstruct, update_scales)
from oracles import brute_force_objective, random_scatter, scatter_objective, sigma_count, structure_matrices


def random_set(seed, G=3, p=4, dof=12):
    rng = np.random.default_rng(seed)
    W, ng = random_scatter(rng, G, p, dof)
    return ScatterSet(W, ng)


# --- parameter counts --------------------------------------------------------

def test_sigma_count_examples():
    assert n_sigma_params("EII", 3, 13) == 1
    assert n_sigma_params("EEI", 2, 2) == 2
    assert n_sigma_params("VVV", 2, 3) == 12


@pytest.mark.parametrize("G", [1, 2, 3, 4])
@pytest.mark.parametrize("p", [2, 3, 5, 13])
def test_sigma_count_matches_table(G, p):
    for code in MODELS:
        assert n_sigma_params(code, G, p) == sigma_count(code, G, p), code


def test_sigma_count_total_at_g3_p13():
    # 1 + 3 + 13 + 15 + 37 + 39 + 91 + 93 + 115 + 247 + 117 + 249 + 271 + 273
    assert sum(n_sigma_params(c, 3, 13) for c in MODELS) == 1564


def test_unknown_code():
    with pytest.raises(ValueError, match="unknown covariance structure"):
        n_sigma_params("XYZ", 2, 2)


# --- decomposition -----------------------------------------------------------

def test_reconstruct_identity():
    np.testing.assert_array_equal(reconstruct(1.0, [1.0, 1.0], np.eye(2)), np.eye(2))


def test_reconstruct_diagonal():
    np.testing.assert_allclose(reconstruct(2.0, [2.0, 0.5], np.eye(2)), np.diag([4.0, 1.0]))


def test_round_trip():
    rng = np.random.default_rng(0)
    for _ in range(20):
        A = rng.normal(size=(5, 5))
        S = A @ A.T + 0.1 * np.eye(5)
        lam, shape, orient = decompose(S)
        assert np.prod(shape) == pytest.approx(1.0, abs=1e-8)
        np.testing.assert_allclose(orient.T @ orient, np.eye(5), atol=1e-8)
        np.testing.assert_allclose(reconstruct(lam, shape, orient), S, atol=1e-10 * np.abs(S).max())


def test_eigen_sorted_is_deterministic():
    S = np.array([[4.0, 1.0], [1.0, 3.0]])
    w, V = eigen_sorted(S)
    assert w[0] >= w[1]
    for j in range(2):
        assert V[np.argmax(np.abs(V[:, j])), j] > 0
    w2, V2 = eigen_sorted(S.copy())
    np.testing.assert_array_equal(V, V2)


# --- closed forms --------------------------------------------------------------

def test_vvv_is_scatter_over_size():
    sc = random_set(1)
    S = update_scales("VVV", sc).matrices()
    np.testing.assert_allclose(S, sc.W / sc.ng[:, None, None], rtol=1e-10)


def test_eii_closed_form_and_1d_minimum():
    sc = random_set(2)
    p = sc.W.shape[1]
    lam = np.trace(sc.W.sum(axis=0)) / (sc.n * p)
    S = update_scales("EII", sc).matrices()
    for g in range(3):
        np.testing.assert_allclose(S[g], lam * np.eye(p), rtol=1e-12)
    f = lambda t: sc.n * p * t + np.trace(sc.W.sum(axis=0)) * np.exp(-t)
    res = minimize_scalar(f, bracket=(-5, 5), tol=1e-12)
    assert np.exp(res.x) == pytest.approx(lam, rel=1e-6)


def test_eee_is_pooled_scatter_and_beats_perturbations():
    sc = random_set(3)
    S = update_scales("EEE", sc).matrices()
    pooled = sc.W.sum(axis=0) / sc.n
    for g in range(3):
        np.testing.assert_allclose(S[g], pooled, rtol=1e-10)
    best = scatter_objective(S, sc.W, sc.ng)
    rng = np.random.default_rng(4)
    for _ in range(50):
        E = rng.normal(scale=0.05, size=pooled.shape)
        P = pooled + 0.5 * (E + E.T) * np.abs(pooled).max()
        if np.linalg.eigvalsh(P)[0] <= 0:
            continue
        assert scatter_objective([P] * 3, sc.W, sc.ng) >= best - 1e-9


# --- constraints -----------------------------------------------------------------

def _assert_pattern(code, s):
    vol, shp, ori = code
    G, p = s.shape.shape
    if vol == "E":
        assert np.all(s.lam == s.lam[0])
    if shp == "I":
        assert np.all(s.shape == 1.0)
    elif shp == "E":
        assert np.all(s.shape == s.shape[0])
    if ori == "I":
        assert np.all(s.orient == np.eye(p))
    elif ori == "E":
        assert np.all(s.orient == s.orient[0])
    np.testing.assert_allclose(np.prod(s.shape, axis=1), 1.0, atol=1e-8)
    for g in range(G):
        np.testing.assert_allclose(s.orient[g].T @ s.orient[g], np.eye(p), atol=1e-8)


@pytest.mark.parametrize("code", MODELS)
def test_structural_constraints_hold_exactly(code):
    for seed in range(5):
        s = update_scales(code, random_set(10 + seed))
        _assert_pattern(code, s)
        assert np.all(np.linalg.eigvalsh(s.matrices()) > 0)


@pytest.mark.parametrize("code", MODELS)
def test_objective_does_not_increase_from_prev(code):
    for seed in range(5):
        old = update_scales(code, random_set(100 + seed))
        sc = random_set(200 + seed)
        new = update_scales(code, sc, prev=old)
        assert objective(new, sc) <= objective(old, sc) + 1e-9


@pytest.mark.parametrize("code", MODELS)
def test_no_worse_than_more_constrained_models(code):
    # Every structure contains EII, and VVV contains every structure.
    sc = random_set(7)
    f = objective(update_scales(code, sc), sc)
    assert f <= objective(update_scales("EII", sc), sc) + 1e-8
    assert f >= objective(update_scales("VVV", sc), sc) - 1e-8


def test_g1_equivalent_structures_agree():
    sc = random_set(8, G=1, p=3)
    for members in G1_EQUIVALENCE.values():
        ref = update_scales(members[0], sc).matrices()
        for code in members[1:]:
            np.testing.assert_allclose(update_scales(code, sc).matrices(), ref, rtol=1e-8, atol=1e-8)
    np.testing.assert_allclose(update_scales("EEE", sc).matrices(), update_scales("VVV", sc).matrices(), rtol=1e-8)


def test_rank_deficient_scatter_raises():
    W = np.zeros((2, 3, 3))
    W[:, 0, 0] = 1.0
    with pytest.raises(DegenerateFitError):
        update_scales("VVV", ScatterSet(W, np.array([5.0, 5.0])))


def test_eigenvalue_floor_clips():
    s = Scales(np.array([1.0]), np.array([[1e6, 1e-6]]), np.eye(2)[None])
    S = s.matrices(floor=1e-3)
    np.testing.assert_allclose(np.linalg.eigvalsh(S[0]), [1e-3, 1e6])
    np.testing.assert_array_equal(S, np.swapaxes(S, 1, 2))


# --- brute-force oracle at p = 2, G = 2 -------------------------------------------

@pytest.mark.parametrize("code", MODELS)
def test_matches_brute_force_optimiser(code):
    rng = np.random.default_rng(sum(map(ord, code)))
    for _ in range(2):
        W, ng = random_scatter(rng)
        sc = ScatterSet(W, ng)
        ours = objective(update_scales(code, sc), sc)
        assert ours <= brute_force_objective(code, W, ng, rng) + 1e-4


def test_oracle_parameterisation_is_consistent():
    # The oracle's analytic objective agrees with the matrix form.
    rng = np.random.default_rng(5)
    W, ng = random_scatter(rng)
    theta = rng.normal(size=6)
    S = structure_matrices("VVV", theta, 2)
    from oracles import _analytic_objective
    assert _analytic_objective("VVV", theta, W, ng) == pytest.approx(scatter_objective(S, W, ng), rel=1e-10)
