"""Simultaneous diagonalization of a pair of symmetric PSD matrices.

For PSD ``A`` and ``B`` there is a nonsingular ``T`` with
``T.T @ A @ T = diag(lam)`` and ``T.T @ B @ T = diag(mu)``. The generalized
eigenvalues are ``nu = lam / mu`` with the conventions ``0/0 -> 0`` and
``positive/0 -> +inf``.

Construction: both quadratic forms vanish on ``ker(A + B)``, so that kernel is
split off with ``lam = mu = 0``. On its orthogonal complement the pencil is
definite; we whiten by ``(A + s B)^{-1/2}`` (``s`` balances the norms) and
diagonalize the whitened ``A``. Because the kernel block is orthonormal and
orthogonal to the rest of ``T``, the block layout (kernel of ``B`` first,
``T1.T @ T2 = 0``) holds automatically whenever
``rank(A + B) == rank(B)``, which gives ``pinv(B) == T @ pinv(diag(mu)) @ T.T``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InfiniteEigenvalue
from .linalg import DEFAULT_TOL, ToleranceConfig, psd_eigh, symmetrize


@dataclass(frozen=True)
class PencilDiagonalization:
    """Result of :func:`simultaneous_diagonalize`.

    ``T`` holds the generalized eigenvectors ``u_i`` as columns, ordered so that
    ``nu`` is ascending (stable sort, ``+inf`` last). ``T`` is not unique; only
    its defining properties are meaningful.
    """

    T: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    nu: np.ndarray

    @property
    def dim(self) -> int:
        return self.T.shape[0]

    def reconstruct(self):
        """Return ``(A, B)`` rebuilt as ``inv(T).T @ diag(.) @ inv(T)``."""
        Ti = np.linalg.inv(self.T)
        return Ti.T @ (self.lam[:, None] * Ti), Ti.T @ (self.mu[:, None] * Ti)

    def finite_count(self) -> int:
        return int(np.count_nonzero(np.isfinite(self.nu)))


def factor_psd(B, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Return ``F`` of shape ``(n, rank(B))`` with ``F @ F.T == B``."""
    w, V = psd_eigh(B, tol, "B")
    pos = w > 0
    return V[:, pos] * np.sqrt(w[pos])


def _classify(lam, mu):
    nu = np.empty_like(lam)
    for i, (l, m) in enumerate(zip(lam, mu)):
        if m > 0:
            nu[i] = l / m
        elif l == 0:
            nu[i] = 0.0
        else:
            nu[i] = np.inf
    return nu


def simultaneous_diagonalize(A, B, tol: ToleranceConfig = DEFAULT_TOL) -> PencilDiagonalization:
    A = symmetrize(A, "A")
    B = symmetrize(B, "B")
    if A.shape != B.shape:
        raise DimensionMismatch(f"A is {A.shape}, B is {B.shape}")
    k = A.shape[0]
    # PSD validation only; the decomposition itself uses the raw matrices
    psd_eigh(A, tol, "A")
    psd_eigh(B, tol, "B")

    na, nb = np.linalg.norm(A), np.linalg.norm(B)
    s = na / nb if na > 0 and nb > 0 else 1.0
    w, Q = psd_eigh(A + s * B, tol, "A + B")
    pos = w > 0
    K = Q[:, ~pos]
    W = Q[:, pos] / np.sqrt(w[pos])

    At = W.T @ A @ W
    At = 0.5 * (At + At.T)
    _, L = np.linalg.eigh(At)
    U = W @ L
    lam_c = np.einsum("ij,ij->j", U, A @ U)
    mu_c = np.einsum("ij,ij->j", U, B @ U)

    T = np.hstack([K, U])
    lam = np.concatenate([np.zeros(K.shape[1]), np.clip(lam_c, 0.0, None)])
    mu = np.concatenate([np.zeros(K.shape[1]), np.clip(mu_c, 0.0, None)])
    # snap at the roundoff level of u^T A u and u^T B u, which scales with ||u||^2
    rtol = tol.rank_tol((k, k))
    if lam.size:
        unorm2 = np.einsum("ij,ij->j", T, T)
        na2 = np.linalg.norm(A, 2) if na > 0 else 0.0
        nb2 = np.linalg.norm(B, 2) if nb > 0 else 0.0
        lam[lam <= rtol * na2 * unorm2 + tol.abs_floor] = 0.0
        mu[mu <= rtol * nb2 * unorm2 + tol.abs_floor] = 0.0
    nu = _classify(lam, mu)
    order = np.argsort(nu, kind="stable")
    return PencilDiagonalization(T=T[:, order], lam=lam[order], mu=mu[order], nu=nu[order])


def pencil_definite(A, B, tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    """True iff ``A + B`` is positive definite (for PSD ``A``, ``B``)."""
    A = symmetrize(A, "A")
    B = symmetrize(B, "B")
    if A.shape != B.shape:
        raise DimensionMismatch(f"A is {A.shape}, B is {B.shape}")
    psd_eigh(A, tol, "A")
    psd_eigh(B, tol, "B")
    w = np.linalg.eigvalsh(A + B)
    if w.size == 0:
        return True
    return bool(w[0] > tol.rank_tol(A.shape) * w[-1] and w[0] > tol.abs_floor)


def variational_residual(diag: PencilDiagonalization, A, B, i: int) -> float:
    """``lambda_max(V.T (A - nu_i B) V)`` for ``V`` the first ``i`` columns of ``T``.

    The subspace spanned by the ``i`` leading eigenvectors makes ``A - nu_i B``
    negative semidefinite, so the result should be ``<= 0`` up to roundoff.
    ``i`` is 1-based.
    """
    if not 1 <= i <= diag.dim:
        raise IndexError(f"index {i} outside 1..{diag.dim}")
    nu_i = diag.nu[i - 1]
    if not np.isfinite(nu_i):
        raise InfiniteEigenvalue(f"nu_{i} is infinite")
    A = symmetrize(A, "A")
    B = symmetrize(B, "B")
    V = diag.T[:, :i]
    M = V.T @ (A - nu_i * B) @ V
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[-1])
