import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eiv_tls.errors import (
    DimensionMismatch,
    GapTooSmall,
    Incompatible,
    NonGeneric,
    NoSolution,
    NotPsd,
    RankDeficient,
)
from eiv_tls.linalg import pinv, projector
from eiv_tls.suites import random_psd, random_tls_instance
from eiv_tls.tls import (
    ErrorCovariance,
    ObservationSet,
    classical_tls_oracle,
    criterion_frobenius,
    criterion_spectral,
    estimate,
    minimal_correction,
    rayleigh_functional,
)


def random_sigma(rng, k, singular):
    if singular:
        return np.diag(np.concatenate([[0.0], rng.uniform(0.1, 1.0, k - 1)]))
    return random_psd(rng, k, k) / k + 0.05 * np.eye(k)


def random_problem(rng):
    n = int(rng.integers(1, 4))
    d = int(rng.integers(1, 3))
    m = int(rng.integers(n + d + 3, 60))
    sigma = random_sigma(rng, n + d, singular=rng.uniform() < 0.5)
    obs, X0 = random_tls_instance(rng, n, d, m, sigma)
    return obs, sigma, X0


# ------------------------------------------------------------------ examples


def test_noiseless_scalar_example():
    A = np.array([[1.0], [2.0], [3.0]])
    sol = estimate(ObservationSet(A, 2 * A), ErrorCovariance(np.eye(2)))
    assert sol.x_hat == pytest.approx(np.array([[2.0]]), abs=1e-14)
    assert sol.nu[0] == pytest.approx(0.0, abs=1e-14)
    assert np.abs(sol.delta).max() <= 1e-14
    assert sol.unique
    assert np.array_equal(sol.x_ext[1:], -np.eye(1))


def test_error_free_regressor_gives_least_squares(rng):
    for _ in range(20):
        a = rng.uniform(-2, 2, size=(30, 1))
        b = 1.7 * a + 0.3 * rng.standard_normal((30, 1))
        ls = np.linalg.lstsq(a, b, rcond=None)[0]
        sol = estimate(ObservationSet(a, b), ErrorCovariance(np.diag([0.0, 1.0])))
        assert np.allclose(sol.x_hat, ls, rtol=1e-10, atol=1e-12)


def test_intercept_layout_noiseless():
    x = np.array([0.0, 1.0, 2.0])
    y = np.array([1.0, 3.0, 5.0])
    A = np.column_stack([np.ones(3), x])
    sol = estimate(ObservationSet(A, y[:, None]), ErrorCovariance(np.diag([0.0, 0.25, 0.25])))
    assert np.allclose(sol.x_hat[:, 0], [1.0, 2.0], atol=1e-12)
    assert sol.nu[0] == pytest.approx(0.0, abs=1e-12)


def test_identity_sigma_matches_classical_oracle(rng):
    checked = 0
    while checked < 50:
        n, d = int(rng.integers(1, 4)), int(rng.integers(1, 3))
        obs, _ = random_tls_instance(rng, n, d, 40, np.eye(n + d))
        try:
            ref = classical_tls_oracle(obs)
        except (GapTooSmall, NonGeneric):
            continue
        sol = estimate(obs, ErrorCovariance(np.eye(n + d)))
        assert np.linalg.norm(sol.x_hat - ref) <= 1e-8
        checked += 1


def test_classical_oracle_examples(rng):
    A0 = rng.standard_normal((30, 2))
    X0 = np.array([[1.0], [-2.0]])
    assert np.allclose(classical_tls_oracle(ObservationSet(A0, A0 @ X0)), X0, atol=1e-12)
    noisy = ObservationSet(A0 + 1e-6 * rng.standard_normal(A0.shape), A0 @ X0 + 1e-6 * rng.standard_normal((30, 1)))
    assert np.linalg.norm(classical_tls_oracle(noisy) - X0) <= 1e-4


def test_classical_oracle_gap_too_small():
    C = np.eye(2)
    with pytest.raises(GapTooSmall):
        classical_tls_oracle(ObservationSet.from_combined(C, 1))


# ----------------------------------------------------------------- failures


def test_zero_sigma_inconsistent_data_has_no_solution():
    A = np.array([[1.0], [2.0], [3.0]])
    B = np.array([[2.0], [5.0], [5.0]])
    with pytest.raises(NoSolution):
        estimate(ObservationSet(A, B), ErrorCovariance(np.zeros((2, 2))))


def test_non_generic_subspace():
    A = np.zeros((3, 1))
    B = np.array([[1.0], [2.0], [3.0]])
    with pytest.raises(NonGeneric):
        estimate(ObservationSet(A, B), ErrorCovariance(np.eye(2)))


def test_tie_is_flagged_not_raised():
    Q = np.linalg.qr(np.array([[1.0, 2.0, 0.5], [0.3, -1.0, 2.0], [1.5, 0.2, -0.7]]))[0]
    C = Q @ np.diag([1.0, 1.0, 2.0]) @ Q.T
    sol = estimate(ObservationSet.from_combined(C, 2), ErrorCovariance(np.eye(3)))
    assert not sol.unique
    assert "non_unique" in sol.warnings
    assert sol.uniqueness_gap == pytest.approx(0.0, abs=1e-12)


def test_low_rank_sigma_is_warned():
    A = np.array([[1.0], [2.0], [3.0], [4.0]])
    B = np.column_stack([2 * A[:, 0], -A[:, 0]])
    sol = estimate(ObservationSet(A, B), ErrorCovariance(np.diag([0.0, 0.0, 1.0])))
    assert np.allclose(sol.x_hat, [[2.0, -1.0]], atol=1e-12)
    assert "sigma_rank_below_d" in sol.warnings
    assert np.abs(sol.delta).max() <= 1e-12
    noisy = B + np.array([[0.1, 0.0], [0.0, 0.2], [0.1, 0.0], [0.0, 0.0]])
    with pytest.raises(NoSolution):
        estimate(ObservationSet(A, noisy), ErrorCovariance(np.diag([0.0, 0.0, 1.0])))


def test_compatibility_ignores_roundoff(rng):
    # C X is zero up to roundoff, so the rank-one X^T Sigma X must not be rejected
    A0 = rng.standard_normal((50, 1)) * 1e3
    X0 = np.array([[0.3, -7.0]])
    C = np.hstack([A0, A0 @ X0])
    X = np.vstack([X0, -np.eye(2)])
    D = minimal_correction(C, np.diag([0.0, 0.0, 1.0]), X)
    assert np.abs(D).max() <= 1e-8


@pytest.mark.parametrize(
    "A, B, sigma, exc",
    [
        (np.ones((3, 1)), np.ones((2, 1)), np.eye(2), DimensionMismatch),
        (np.ones((3, 1)), np.ones((3, 1)), np.diag([1.0, -1.0]), NotPsd),
    ],
)
def test_input_errors(A, B, sigma, exc):
    with pytest.raises(exc):
        estimate(ObservationSet(A, B), ErrorCovariance(sigma))


def test_sigma_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        estimate(ObservationSet(np.ones((3, 1)), np.ones((3, 1))), ErrorCovariance(np.eye(3)))


# ---------------------------------------------------------------- properties


def test_feasibility_and_criteria(rng):
    for _ in range(100):
        obs, sigma, _ = random_problem(rng)
        sol = estimate(obs, ErrorCovariance(sigma))
        C, d = obs.C, obs.d
        k = C.shape[1]
        assert np.linalg.norm((C - sol.delta) @ sol.x_ext) <= 1e-8 * (1 + np.linalg.norm(C))
        P = projector(sigma)
        assert np.linalg.norm(sol.delta @ (np.eye(k) - P)) <= 1e-8 * (1 + np.linalg.norm(sol.delta))
        target = math.sqrt(float(np.sum(sol.nu[:d])))
        assert abs(criterion_frobenius(sol.delta, sigma) - target) <= 1e-8 * (1 + target)
        assert abs(criterion_spectral(sol.delta, sigma) - sol.nu[d - 1]) <= 1e-8 * (1 + sol.nu[d - 1])
        assert sol.frobenius_min == pytest.approx(target, rel=1e-12, abs=1e-15)
        assert sol.spectral_min == sol.nu[d - 1]


@pytest.mark.parametrize("c", [1e-3, 1.0, 1e3])
def test_sigma_scale_invariance(c, rng):
    for _ in range(30):
        obs, sigma, _ = random_problem(rng)
        base = estimate(obs, ErrorCovariance(sigma)).x_hat
        scaled = estimate(obs, ErrorCovariance(c * sigma)).x_hat
        assert np.linalg.norm(scaled - base) <= 1e-9 * (1 + np.linalg.norm(base))


def test_rayleigh_minimality(rng):
    for _ in range(10):
        obs, sigma, _ = random_problem(rng)
        sol = estimate(obs, ErrorCovariance(sigma))
        best = rayleigh_functional(sol.x_ext, obs.C, sigma)
        assert best == pytest.approx(sol.nu[obs.d - 1], rel=1e-8, abs=1e-10)
        tried = 0
        while tried < 100:
            X = rng.standard_normal((obs.n + obs.d, obs.d))
            try:
                val = rayleigh_functional(X, obs.C, sigma)
            except RankDeficient:
                continue
            assert best <= val + 1e-9
            tried += 1


def feasible_perturbation(rng, m, X, sigma):
    """Random W with W X = 0 and W (I - P_sigma) = 0."""
    w, V = np.linalg.eigh(sigma)
    Vr = V[:, w > 1e-12 * w.max()]
    M = X.T @ Vr
    _, s, Zt = np.linalg.svd(M)
    r = int(np.sum(s > 1e-12 * max(1.0, s.max(initial=0.0))))
    Z = Zt[r:].T
    basis = Vr @ Z
    return rng.standard_normal((m, basis.shape[1])) @ basis.T


def test_least_element_property(rng):
    checked = 0
    while checked < 100:
        obs, sigma, _ = random_problem(rng)
        sol = estimate(obs, ErrorCovariance(sigma))
        W = feasible_perturbation(rng, obs.m, sol.x_ext, sigma)
        if W.size == 0:
            continue
        Dp = sol.delta + W * 10.0 ** rng.uniform(-3, 0)
        C = obs.C
        assert np.linalg.norm((C - Dp) @ sol.x_ext) <= 1e-8 * (1 + np.linalg.norm(C))
        Sp = pinv(sigma)
        diff = Dp @ Sp @ Dp.T - sol.delta @ Sp @ sol.delta.T
        assert np.linalg.eigvalsh(0.5 * (diff + diff.T))[0] >= -1e-9 * (1 + np.abs(diff).max())
        checked += 1


# --------------------------------------------------------- helper operations


def test_minimal_correction_examples(rng):
    C = rng.standard_normal((10, 3))
    X = rng.standard_normal((3, 1))
    Cz = C - (C @ X) @ X.T / (X.T @ X)
    assert np.abs(minimal_correction(Cz, np.eye(3), X)).max() <= 1e-14
    X2 = rng.standard_normal((3, 2))
    expected = C @ X2 @ np.linalg.inv(X2.T @ X2) @ X2.T
    assert np.allclose(minimal_correction(C, np.eye(3), X2), expected, atol=1e-12)
    with pytest.raises(Incompatible):
        minimal_correction(C, np.zeros((3, 3)), X)
    with pytest.raises(RankDeficient):
        minimal_correction(C, np.eye(3), np.ones((3, 2)))


def test_minimal_correction_is_feasible(rng):
    for _ in range(100):
        obs, sigma, _ = random_problem(rng)
        X = rng.standard_normal((obs.n + obs.d, obs.d))
        try:
            D = minimal_correction(obs.C, sigma, X)
        except Incompatible:
            continue
        assert np.linalg.norm((obs.C - D) @ X) <= 1e-8 * (1 + np.linalg.norm(obs.C) * np.linalg.norm(X))


@pytest.mark.parametrize(
    "delta, sigma, value",
    [
        (np.zeros((4, 2)), np.eye(2), 0.0),
        (np.eye(3), np.eye(3), math.sqrt(3.0)),
        (np.eye(2), np.diag([4.0, 0.0]), 0.5),
    ],
)
def test_criterion_frobenius_examples(delta, sigma, value):
    assert criterion_frobenius(delta, sigma) == pytest.approx(value, abs=1e-15)


@pytest.mark.parametrize(
    "delta, sigma, value",
    [
        (np.zeros((4, 2)), np.eye(2), 0.0),
        (np.diag([3.0, 0.0, 0.0]), np.eye(3), 9.0),
        (np.outer([1.0, 2.0], [2.0, 0.0]), np.diag([4.0, 1.0]), 5.0),
    ],
)
def test_criterion_spectral_examples(delta, sigma, value):
    assert criterion_spectral(delta, sigma) == pytest.approx(value, rel=1e-14)


def test_criterion_spectral_matches_explicit_product(rng):
    for _ in range(50):
        k = int(rng.integers(2, 6))
        sigma = random_psd(rng, k, int(rng.integers(1, k + 1)))
        D = rng.standard_normal((7, k)) @ sigma
        ref = np.linalg.eigvalsh(D @ pinv(sigma) @ D.T)[-1]
        assert criterion_spectral(D, sigma) == pytest.approx(ref, rel=1e-8)


def test_rayleigh_functional_examples(rng):
    A0 = rng.standard_normal((20, 2))
    X0 = np.array([[0.5], [1.5]])
    C = np.hstack([A0, A0 @ X0])
    X0e = np.vstack([X0, [[-1.0]]])
    assert rayleigh_functional(X0e, C, np.eye(3)) <= 1e-20
    X = rng.standard_normal((3, 2))
    K = rng.standard_normal((2, 2)) + 2 * np.eye(2)
    assert rayleigh_functional(X @ K, C, np.eye(3)) == pytest.approx(rayleigh_functional(X, C, np.eye(3)), rel=1e-10)
    with pytest.raises(RankDeficient):
        rayleigh_functional(np.array([[1.0], [0.0], [0.0]]), C, np.diag([0.0, 1.0, 1.0]))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_solution_json_dict(seed):
    rng = np.random.default_rng(seed)
    obs, sigma, _ = random_problem(rng)
    out = estimate(obs, ErrorCovariance(sigma)).to_dict()
    assert set(out) == {"x_hat", "nu", "frobenius_min", "spectral_min", "unique", "gap",
                        "bottom_block_condition", "warnings"}
    assert all(isinstance(v, float) or v == "inf" for v in out["nu"])
    assert 0 < out["bottom_block_condition"] <= 1
