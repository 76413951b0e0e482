"""Dense linear algebra helpers sharing one tolerance policy.

All rank decisions in the package go through :class:`ToleranceConfig`, so a
single override (``--tol-rank`` on the command line) changes every cutoff
consistently.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonFinite, NotPsd

EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class ToleranceConfig:
    """Numerical thresholds.

    Parameters
    ----------
    rel_rank_tol : float or None
        Singular values below ``rel_rank_tol * sigma_max`` count as zero.
        ``None`` selects ``max(rows, cols) * eps * 32`` per matrix.
    abs_floor : float
        Absolute floor under which singular values are always zero.
    gap_rtol : float
        Relative threshold for eigenvalue-gap decisions (uniqueness flags,
        classical TLS gap).
    """

    rel_rank_tol: float | None = None
    abs_floor: float = 1e-300
    gap_rtol: float = 1e-8

    def __post_init__(self):
        if self.rel_rank_tol is not None and not 0.0 < self.rel_rank_tol < 1.0:
            raise ValueError("rel_rank_tol must lie in (0, 1)")
        if not self.abs_floor > 0.0:
            raise ValueError("abs_floor must be positive")
        if not self.gap_rtol > 0.0:
            raise ValueError("gap_rtol must be positive")

    def rank_tol(self, shape) -> float:
        if self.rel_rank_tol is not None:
            return self.rel_rank_tol
        return max(max(shape), 1) * EPS * 32


DEFAULT_TOL = ToleranceConfig()


def as_matrix(M, name="matrix") -> np.ndarray:
    """Return ``M`` as a finite 2-D float64 array."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim == 1:
        M = M.reshape(-1, 1)
    if M.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NonFinite(f"{name} contains non-finite entries")
    return M


def symmetrize(S, name="matrix") -> np.ndarray:
    """Finite square matrix, symmetrized as ``(S + S.T) / 2``."""
    S = as_matrix(S, name)
    if S.shape[0] != S.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {S.shape}")
    return 0.5 * (S + S.T)


def psd_eigh(S, tol: ToleranceConfig = DEFAULT_TOL, name="matrix"):
    """Eigendecomposition of a PSD matrix with tolerance-clipped eigenvalues.

    Returns ``(w, V)`` with ``w`` ascending and nonnegative. Eigenvalues below
    the rank cutoff are set to exactly zero.

    Raises
    ------
    NotPsd
        If an eigenvalue is negative beyond the rank cutoff.
    """
    S = symmetrize(S, name)
    if S.size == 0:
        return np.zeros(0), np.zeros((0, 0))
    w, V = np.linalg.eigh(S)
    scale = float(np.max(np.abs(w)))
    cutoff = tol.rank_tol(S.shape) * scale + tol.abs_floor
    if w[0] < -cutoff:
        raise NotPsd(f"{name} has eigenvalue {w[0]:.3e} < 0")
    w = np.where(w < cutoff, 0.0, w)
    return w, V


def pinv(M, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse by SVD with the shared rank cutoff."""
    M = as_matrix(M)
    if M.size == 0:
        return np.zeros(M.shape[::-1])
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    keep = _kept(s, tol, M.shape)
    return (Vt[keep].T / s[keep]) @ U[:, keep].T


def _kept(s, tol, shape):
    if s.size == 0:
        return np.zeros(0, dtype=bool)
    return (s >= tol.rank_tol(shape) * s[0]) & (s >= tol.abs_floor)


def numerical_rank(M, tol: ToleranceConfig = DEFAULT_TOL) -> int:
    M = as_matrix(M)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.count_nonzero(_kept(s, tol, M.shape)))


def projector(S, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Orthogonal projector ``S @ pinv(S)`` onto the column space of PSD ``S``."""
    w, V = psd_eigh(S, tol)
    Vr = V[:, w > 0]
    return Vr @ Vr.T


def psd_sqrt(S, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Symmetric PSD square root; tiny negative eigenvalues are clipped to 0."""
    w, V = psd_eigh(S, tol)
    R = (V * np.sqrt(w)) @ V.T
    return 0.5 * (R + R.T)


def psd_pinv_sqrt(S, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """``pinv(psd_sqrt(S))`` computed from a single eigendecomposition."""
    w, V = psd_eigh(S, tol)
    inv = np.zeros_like(w)
    pos = w > 0
    inv[pos] = 1.0 / np.sqrt(w[pos])
    R = (V * inv) @ V.T
    return 0.5 * (R + R.T)


def gram(C) -> np.ndarray:
    """``C.T @ C`` accumulated in extended precision.

    Falls back to compensated (``math.fsum``) accumulation on platforms where
    ``np.longdouble`` is no wider than float64.
    """
    C = as_matrix(C)
    if np.finfo(np.longdouble).eps < EPS:
        Cl = C.astype(np.longdouble)
        G = (Cl.T @ Cl).astype(np.float64)
    else:
        import math

        k = C.shape[1]
        G = np.empty((k, k))
        for i in range(k):
            for j in range(i, k):
                G[i, j] = G[j, i] = math.fsum(C[:, i] * C[:, j])
    return 0.5 * (G + G.T)
