"""Total least squares for ``A X ~ B`` with a known (up to scale) error covariance.

The estimate is read off the pencil ``<C^T C, Sigma>``: the eigenvectors of the
``d`` smallest generalized eigenvalues span the estimated subspace
``span((X_hat; -I))``. The minimal correction is then given in closed form by
``Delta = C X pinv(X^T Sigma X) X^T Sigma``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    GapTooSmall,
    Incompatible,
    NonGeneric,
    NoSolution,
    RankDeficient,
)
from .linalg import (
    DEFAULT_TOL,
    ToleranceConfig,
    as_matrix,
    gram,
    numerical_rank,
    projector,
    psd_eigh,
    psd_pinv_sqrt,
    pinv,
    symmetrize,
)
from .pencil import PencilDiagonalization, simultaneous_diagonalize


@dataclass(frozen=True)
class ObservationSet:
    """Observed regressors ``A`` (m x n) and responses ``B`` (m x d)."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        if A.shape[0] != B.shape[0]:
            raise DimensionMismatch(f"A has {A.shape[0]} rows, B has {B.shape[0]}")
        if A.shape[0] < 1 or A.shape[1] < 1 or B.shape[1] < 1:
            raise DimensionMismatch("need m, n, d >= 1")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @classmethod
    def from_combined(cls, C, n: int) -> "ObservationSet":
        C = as_matrix(C, "C")
        if not 1 <= n < C.shape[1]:
            raise DimensionMismatch(f"n={n} incompatible with {C.shape[1]} columns")
        return cls(C[:, :n], C[:, n:])

    @property
    def C(self) -> np.ndarray:
        return np.hstack([self.A, self.B])

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def d(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class ErrorCovariance:
    """Covariance of one error row ``(a_tilde; b_tilde)``, known up to a positive factor.

    Only positive semidefiniteness is enforced on construction. A rank below
    ``d`` rules out consistency but not the estimator itself, so it surfaces
    as a warning in :func:`estimate`.
    """

    sigma: np.ndarray
    tol: ToleranceConfig = field(default=DEFAULT_TOL, repr=False, compare=False)

    def __post_init__(self):
        S = symmetrize(self.sigma, "sigma")
        psd_eigh(S, self.tol, "sigma")
        object.__setattr__(self, "sigma", S)

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]

    @property
    def rank(self) -> int:
        return numerical_rank(self.sigma, self.tol)


def _sigma(sigma) -> np.ndarray:
    if isinstance(sigma, ErrorCovariance):
        return sigma.sigma
    return ErrorCovariance(sigma).sigma


@dataclass(frozen=True)
class TlsSolution:
    x_hat: np.ndarray
    x_ext: np.ndarray
    delta: np.ndarray
    nu: np.ndarray
    frobenius_min: float
    spectral_min: float
    uniqueness_gap: float
    unique: bool
    bottom_block_condition: float
    warnings: tuple = ()

    def to_dict(self) -> dict:
        return {
            "x_hat": self.x_hat.tolist(),
            "nu": [_json_float(v) for v in self.nu],
            "frobenius_min": self.frobenius_min,
            "spectral_min": self.spectral_min,
            "unique": self.unique,
            "gap": _json_float(self.uniqueness_gap),
            "bottom_block_condition": self.bottom_block_condition,
            "warnings": list(self.warnings),
        }


def _json_float(v):
    v = float(v)
    return v if math.isfinite(v) else "inf"


def estimate(obs: ObservationSet, cov: ErrorCovariance, tol: ToleranceConfig = DEFAULT_TOL) -> TlsSolution:
    """TLS estimate of ``X`` in ``A X ~ B``.

    Raises
    ------
    NoSolution
        If ``nu_d`` is infinite, i.e. no correction ``Delta`` with
        ``Delta (I - P_Sigma) = 0`` makes ``rank(C - Delta) <= n``.
    NonGeneric
        If the estimated subspace has a (numerically) singular bottom block.
    """
    n, d = obs.n, obs.d
    sigma = _sigma(cov)
    if sigma.shape != (n + d, n + d):
        raise DimensionMismatch(f"sigma is {sigma.shape}, expected {(n + d, n + d)}")
    C = obs.C
    pen = simultaneous_diagonalize(gram(C), sigma, tol)
    return _solution_from_pencil(C, sigma, pen, n, d, tol)


def _solution_from_pencil(C, sigma, pen: PencilDiagonalization, n, d, tol) -> TlsSolution:
    nu = pen.nu
    if not np.isfinite(nu[d - 1]):
        raise NoSolution(f"nu_{d} is infinite: the constraints are incompatible")

    Q, _ = np.linalg.qr(pen.T[:, :d])
    bottom_sv = np.linalg.svd(Q[n:], compute_uv=False)
    if bottom_sv[-1] <= tol.rank_tol((n + d, d)):
        raise NonGeneric("bottom d x d block of the estimated subspace basis is singular")
    x_hat = -np.linalg.solve(Q[n:].T, Q[:n].T).T
    x_ext = np.vstack([x_hat, -np.eye(d)])

    nu_d = float(nu[d - 1])
    gap = float(nu[d] - nu_d)
    unique = bool(gap > tol.gap_rtol * (1.0 + nu_d))
    delta = minimal_correction(C, sigma, x_ext, tol)

    warnings = []
    if numerical_rank(sigma, tol) < d:
        warnings.append("sigma_rank_below_d")
    if not unique:
        warnings.append("non_unique")
    return TlsSolution(
        x_hat=x_hat,
        x_ext=x_ext,
        delta=delta,
        nu=nu[: d + 1].copy(),
        frobenius_min=math.sqrt(float(np.sum(nu[:d]))),
        spectral_min=nu_d,
        uniqueness_gap=gap,
        unique=unique,
        bottom_block_condition=float(bottom_sv[-1] / bottom_sv[0]),
        warnings=tuple(warnings),
    )


def _compatible(G, H, g_scale, h_scale, tol) -> bool:
    """Whether ``span(H) <= span(G)`` for PSD ``d x d`` matrices ``G``, ``H``.

    Each matrix is measured against its natural scale (``||Sigma|| ||X||^2``
    and ``||C||^2 ||X||^2``), so roundoff-level entries count as zero instead
    of being blown up to unit size.
    """
    cut = tol.rank_tol((G.shape[0], 2 * G.shape[1]))
    if h_scale == 0 or np.linalg.norm(H, 2) <= cut * h_scale:
        return True
    if g_scale == 0:
        return False
    Gn = G / g_scale
    sg = np.linalg.svd(Gn, compute_uv=False)
    ss = np.linalg.svd(np.hstack([Gn, H / h_scale]), compute_uv=False)
    return int(np.sum(ss > cut)) == int(np.sum(sg > cut))


def minimal_correction(C, sigma, X, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Loewner-least correction for a fixed ``X``.

    Among all ``Delta`` with ``Delta (I - P_Sigma) = 0`` and ``(C - Delta) X = 0``
    the matrix ``Delta pinv(Sigma) Delta^T`` is minimized, in the Loewner order,
    by ``Delta = C X pinv(X^T Sigma X) X^T Sigma``.

    Raises
    ------
    Incompatible
        If ``span(X^T C^T)`` is not contained in ``span(X^T Sigma)``.
    RankDeficient
        If ``X`` lacks full column rank.
    """
    C = as_matrix(C, "C")
    sigma = _sigma(sigma)
    X = as_matrix(X, "X")
    if C.shape[1] != X.shape[0] or sigma.shape[0] != X.shape[0]:
        raise DimensionMismatch("C, sigma and X disagree on n + d")
    if numerical_rank(X, tol) != X.shape[1]:
        raise RankDeficient("X does not have full column rank")
    CX = C @ X
    SX = sigma @ X
    G = X.T @ SX
    G = 0.5 * (G + G.T)
    x2 = np.linalg.norm(X, 2) ** 2
    g_scale = np.linalg.norm(sigma, 2) * x2
    h_scale = np.linalg.norm(C, 2) ** 2 * x2
    if not _compatible(G, CX.T @ CX, g_scale, h_scale, tol):
        raise Incompatible("span(X^T C^T) is not contained in span(X^T Sigma)")
    return CX @ pinv(G, tol) @ SX.T


def minimal_correction_columns(C, sigma, xs, tol: ToleranceConfig = DEFAULT_TOL):
    """Vectorized :func:`minimal_correction` over many single-column ``X``.

    ``xs`` has shape ``(g, n + d)``. Returns ``(deltas, feasible)`` where
    ``deltas`` has shape ``(g, m, n + d)`` and infeasible candidates carry a
    zero correction with ``feasible`` False.
    """
    C = as_matrix(C, "C")
    sigma = _sigma(sigma)
    xs = np.asarray(xs, dtype=np.float64)
    CX = xs @ C.T                     # (g, m)
    SX = xs @ sigma                   # (g, k)
    G = np.einsum("gk,gk->g", xs, SX)
    H = np.einsum("gm,gm->g", CX, CX)
    # same cutoff as the scalar path: a 1 x 1 matrix is zero below abs_floor only
    g_pos = G > tol.abs_floor
    feasible = g_pos | (H <= tol.abs_floor)
    ginv = np.where(g_pos, 1.0 / np.where(g_pos, G, 1.0), 0.0)
    deltas = CX[:, :, None] * (ginv[:, None] * SX)[:, None, :]
    return deltas, feasible


def criterion_frobenius(delta, sigma, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """``||Delta pinv(Sigma^{1/2})||_F``."""
    delta = as_matrix(delta, "delta")
    sigma = _sigma(sigma)
    if delta.shape[1] != sigma.shape[0]:
        raise DimensionMismatch("delta and sigma disagree on n + d")
    return float(np.linalg.norm(delta @ psd_pinv_sqrt(sigma, tol)))


def criterion_spectral(delta, sigma, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """``lambda_max(Delta pinv(Sigma) Delta^T)``.

    Evaluated as the squared largest singular value of
    ``Delta pinv(Sigma^{1/2})`` so the ``m x m`` product is never formed.
    """
    delta = as_matrix(delta, "delta")
    sigma = _sigma(sigma)
    if delta.shape[1] != sigma.shape[0]:
        raise DimensionMismatch("delta and sigma disagree on n + d")
    M = delta @ psd_pinv_sqrt(sigma, tol)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2) ** 2)


def rayleigh_functional(X, C, sigma, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """``lambda_max(inv(X^T Sigma X) X^T C^T C X)``; minimized by the TLS subspace."""
    X = as_matrix(X, "X")
    C = as_matrix(C, "C")
    sigma = _sigma(sigma)
    G = X.T @ sigma @ X
    G = 0.5 * (G + G.T)
    if numerical_rank(G, tol) != X.shape[1]:
        raise RankDeficient("X^T Sigma X is singular")
    CX = C @ X
    return float(scipy.linalg.eigh(CX.T @ CX, G, eigvals_only=True)[-1])


def classical_tls_oracle(obs: ObservationSet, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Classical TLS for ``Sigma = I`` from the SVD of ``C``.

    Independent of the pencil route: ``X = -V12 inv(V22)`` where ``V[:, n:]``
    are the right singular vectors of the ``d`` smallest singular values.
    """
    n, d = obs.n, obs.d
    C = obs.C
    _, s, Vt = np.linalg.svd(C, full_matrices=True)
    s = np.concatenate([s, np.zeros(n + d - s.size)])
    if not s[n - 1] - s[n] > tol.gap_rtol * s[n - 1]:
        raise GapTooSmall(f"sigma_n={s[n - 1]:.6g} and sigma_n+1={s[n]:.6g} are not separated")
    V2 = Vt[n:].T
    bottom = V2[n:]
    if np.linalg.svd(bottom, compute_uv=False)[-1] <= tol.rank_tol((n + d, d)):
        raise NonGeneric("bottom block of the classical TLS basis is singular")
    return -np.linalg.solve(bottom.T, V2[:n].T).T


def projector_sigma(sigma, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    return projector(_sigma(sigma), tol)
