"""Canonical angles between column spans, and the X-hat error bound."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, RankDeficient
from .linalg import DEFAULT_TOL, ToleranceConfig, as_matrix, numerical_rank

_CLIP_SLACK = 1e-12


@dataclass(frozen=True)
class SubspaceAngles:
    sines: np.ndarray
    max_sine: float


def orthonormal_basis(X, tol: ToleranceConfig = DEFAULT_TOL, name="X") -> np.ndarray:
    X = as_matrix(X, name)
    if numerical_rank(X, tol) != X.shape[1]:
        raise RankDeficient(f"{name} does not have full column rank")
    Q, _ = np.linalg.qr(X)
    return Q


def canonical_sines(X1, X2, tol: ToleranceConfig = DEFAULT_TOL) -> SubspaceAngles:
    """Sines of the canonical angles between ``span(X1)`` and ``span(X2)``.

    These are the ``cols(X1)`` largest singular values of
    ``P1 (I - P2)``, computed as the singular values of ``(I - Q2 Q2^T) Q1``
    with ``Q1``, ``Q2`` orthonormal bases. When ``cols(X1) > cols(X2)`` at least
    ``cols(X1) - cols(X2)`` of the sines equal one.
    """
    X1 = as_matrix(X1, "X1")
    X2 = as_matrix(X2, "X2")
    if X1.shape[0] != X2.shape[0]:
        raise DimensionMismatch(f"row counts differ: {X1.shape[0]} vs {X2.shape[0]}")
    Q1 = orthonormal_basis(X1, tol, "X1")
    Q2 = orthonormal_basis(X2, tol, "X2")
    R = Q1 - Q2 @ (Q2.T @ Q1)
    s = np.linalg.svd(R, compute_uv=False)
    if s.size and (s[0] > 1 + _CLIP_SLACK):
        raise ArithmeticError(f"sine {s[0]!r} exceeds 1 beyond roundoff")
    s = np.clip(s, 0.0, 1.0)
    s = np.sort(s)[::-1]
    return SubspaceAngles(sines=s, max_sine=float(s[0]) if s.size else 0.0)


def max_sine(X1, X2, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    return canonical_sines(X1, X2, tol).max_sine


def xhat_error_bound(s: float, x0_norm: float) -> float:
    """Upper bound on ``||A B^{-1} + X0||`` given the largest sine ``s``.

    With ``k = 1 + x0_norm**2`` the bound is
    ``k (x0_norm s^2 + s sqrt(1 - s^2)) / (1 - k s^2)``, valid for
    ``s < 1/sqrt(k)``; outside that range ``B`` may be singular and the
    function returns ``inf``.
    """
    k = 1.0 + x0_norm * x0_norm
    denom = 1.0 - k * s * s
    if s < 0 or denom <= 0.0:
        return math.inf
    return k * (x0_norm * s * s + s * math.sqrt(1.0 - s * s)) / denom
