import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from eiv_tls.errors import DimensionMismatch, InfiniteEigenvalue, NotPsd
from eiv_tls.linalg import numerical_rank, pinv
from eiv_tls.pencil import (
    factor_psd,
    pencil_definite,
    simultaneous_diagonalize,
    variational_residual,
)
from eiv_tls.suites import PAIR_KINDS, check_pencil_pair, random_psd, random_psd_pair


def det_roots(A, B):
    """Finite roots of det(A - nu B) for 2x2 pairs, by expanding the polynomial."""
    a, b = A, B
    c2 = b[0, 0] * b[1, 1] - b[0, 1] * b[1, 0]
    c1 = -(a[0, 0] * b[1, 1] + a[1, 1] * b[0, 0] - a[0, 1] * b[1, 0] - a[1, 0] * b[0, 1])
    c0 = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    coeffs = np.trim_zeros(np.array([c2, c1, c0]), "f")
    return np.sort(np.roots(coeffs).real)


@pytest.mark.parametrize(
    "A, B, nu",
    [
        (np.diag([3.0, 0.0]), np.eye(2), [0.0, 3.0]),
        (np.eye(2), np.zeros((2, 2)), [np.inf, np.inf]),
        (np.array([[2.0, 1.0], [1.0, 2.0]]), np.diag([1.0, 0.0]), [1.5, np.inf]),
    ],
)
def test_simultaneous_diagonalize_examples(A, B, nu):
    D = simultaneous_diagonalize(A, B)
    assert np.allclose(D.nu, nu, rtol=1e-12)
    assert np.all(np.isposinf(D.nu) == np.isposinf(nu))


def test_finite_root_matches_determinant_polynomial():
    A = np.array([[2.0, 1.0], [1.0, 2.0]])
    B = np.diag([1.0, 0.0])
    roots = det_roots(A, B)
    D = simultaneous_diagonalize(A, B)
    assert roots.shape == (1,)
    assert D.nu[0] == pytest.approx(roots[0], rel=1e-12)


def test_matches_scipy_for_definite_b(rng):
    for _ in range(100):
        k = int(rng.integers(1, 9))
        A = random_psd(rng, k, int(rng.integers(0, k + 1)))
        B = random_psd(rng, k, k) + 0.5 * np.eye(k)
        ref = scipy.linalg.eigh(A, B, eigvals_only=True)
        D = simultaneous_diagonalize(A, B)
        assert np.allclose(D.nu, np.clip(ref, 0, None), rtol=1e-8, atol=1e-9 * (1 + ref.max()))


@pytest.mark.parametrize("kind", PAIR_KINDS)
def test_defining_properties(kind, rng):
    for _ in range(40):
        k = int(rng.integers(2, 9))
        A, B = random_psd_pair(rng, kind, k)
        res = check_pencil_pair(A, B)
        assert res["reconstruction"] <= 1e-9
        assert res["eigen_equation"] <= 1e-8
        assert res["variational"] <= 1e-8
        if res["pinv_identity"] is not None:
            assert res["pinv_identity"] <= 1e-8


def test_invariants_hold(rng):
    for kind in PAIR_KINDS:
        A, B = random_psd_pair(rng, kind, 6)
        D = simultaneous_diagonalize(A, B)
        assert np.all(D.lam >= 0) and np.all(D.mu >= 0)
        assert np.all(np.diff(D.nu[np.isfinite(D.nu)]) >= 0)
        finite = np.isfinite(D.nu)
        assert not np.any(finite[np.argmax(~finite):]) or finite.all()
        assert abs(np.linalg.det(D.T)) > 0
        pos = D.mu > 0
        assert np.allclose(D.nu[pos], D.lam[pos] / D.mu[pos])
        assert np.all(D.nu[(D.lam == 0) & (D.mu == 0)] == 0)
        assert np.all(np.isposinf(D.nu[(D.lam > 0) & (D.mu == 0)]))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
def test_nu_scale_equivariance(seed, c):
    rng = np.random.default_rng(seed)
    A, B = random_psd_pair(rng, "generic", int(rng.integers(2, 7)))
    nu = simultaneous_diagonalize(A, B).nu
    nu_c = simultaneous_diagonalize(A, c * B).nu
    finite = np.isfinite(nu)
    assert np.array_equal(finite, np.isfinite(nu_c))
    assert np.allclose(nu_c[finite], nu[finite] / c, rtol=1e-7, atol=1e-10 * (1 + nu[finite].max() / c))


def test_pseudoinverse_identity_when_ranks_match(rng):
    for _ in range(50):
        A, B = random_psd_pair(rng, "range_in_b", int(rng.integers(2, 9)))
        assert numerical_rank(A + B) == numerical_rank(B)
        D = simultaneous_diagonalize(A, B)
        mu_pinv = np.where(D.mu > 0, 1.0 / np.where(D.mu > 0, D.mu, 1.0), 0.0)
        Bp = pinv(B)
        assert np.linalg.norm(Bp - (D.T * mu_pinv) @ D.T.T) <= 1e-8 * (1 + np.linalg.norm(Bp))


@pytest.mark.parametrize(
    "B",
    [np.eye(2), np.zeros((2, 2)), np.diag([4.0, 0.0])],
)
def test_factor_psd_examples(B):
    F = factor_psd(B)
    assert F.shape == (2, numerical_rank(B))
    assert np.allclose(F @ F.T, B, atol=1e-14)


def test_factor_psd_random(rng):
    for _ in range(100):
        k = int(rng.integers(1, 9))
        S = random_psd(rng, k, int(rng.integers(0, k + 1)))
        F = factor_psd(S)
        assert np.linalg.norm(F @ F.T - S) <= 1e-10 * (1 + np.linalg.norm(S))


@pytest.mark.parametrize(
    "A, B, expected",
    [
        (np.eye(2), np.zeros((2, 2)), True),
        (np.diag([1.0, 0.0]), np.zeros((2, 2)), False),
        (np.diag([1.0, 0.0]), np.diag([0.0, 1.0]), True),
    ],
)
def test_pencil_definite_examples(A, B, expected):
    assert pencil_definite(A, B) is expected


def test_pencil_definite_noiseless_model(rng):
    A0 = rng.uniform(0, 3, size=(30, 1))
    C = np.hstack([A0, 2 * A0])
    Sigma = np.eye(2)
    assert np.linalg.eigvalsh(C.T @ C + Sigma)[0] > 0
    assert pencil_definite(C.T @ C, Sigma)


@pytest.mark.parametrize(
    "A, B",
    [
        (np.diag([3.0, 0.0]), np.eye(2)),
        (np.array([[2.0, 1.0], [1.0, 2.0]]), np.diag([1.0, 0.0])),
    ],
)
def test_variational_residual_examples(A, B):
    D = simultaneous_diagonalize(A, B)
    assert variational_residual(D, A, B, 1) <= 1e-10


def test_variational_residual_rejects_infinite():
    D = simultaneous_diagonalize(np.eye(2), np.zeros((2, 2)))
    with pytest.raises(InfiniteEigenvalue):
        variational_residual(D, np.eye(2), np.zeros((2, 2)), 1)


def test_errors():
    with pytest.raises(NotPsd):
        simultaneous_diagonalize(np.diag([1.0, -1.0]), np.eye(2))
    with pytest.raises(NotPsd):
        factor_psd(np.diag([1.0, -1.0]))
    with pytest.raises(DimensionMismatch):
        simultaneous_diagonalize(np.eye(2), np.eye(3))


def test_common_kernel_gets_zero_eigenvalues():
    A = np.diag([1.0, 0.0, 0.0])
    B = np.diag([0.0, 2.0, 0.0])
    D = simultaneous_diagonalize(A, B)
    assert list(D.nu) == [0.0, 0.0, np.inf]
    assert D.finite_count() == 2
