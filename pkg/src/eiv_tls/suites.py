"""Randomized verification sweeps behind ``eiv-tls verify``.

Each suite returns a plain dict of counts; ``violations`` must be zero.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import EivTlsError, GapTooSmall, NonGeneric, SingularN
from .harness import (
    ErrorLaw,
    ModelSpec,
    RegressorLaw,
    brute_force_tls,
    check_perturbation_lemma,
    check_sin_bound,
    example21_spec,
    generate_dataset,
    perturbed_minimizer,
)
from .linalg import DEFAULT_TOL, ToleranceConfig, numerical_rank, pinv
from .pencil import factor_psd, simultaneous_diagonalize, variational_residual
from .subspace import canonical_sines, xhat_error_bound
from .tls import (
    ErrorCovariance,
    ObservationSet,
    classical_tls_oracle,
    criterion_frobenius,
    criterion_spectral,
    estimate,
)

PAIR_KINDS = ("generic", "singular_b", "shared_kernel", "range_in_b", "low_rank")


def random_psd(rng, k, rank, basis=None, scale=1.0):
    """PSD ``k x k`` matrix of the given rank, optionally inside ``span(basis)``."""
    F = rng.standard_normal((k, rank))
    if basis is not None:
        F = basis @ rng.standard_normal((basis.shape[1], rank))
    return scale * (F @ F.T)


def random_psd_pair(rng, kind: str, k: int):
    """Random PSD pair ``(A, B)`` of dimension ``k >= 2`` in one of :data:`PAIR_KINDS`.

    ``shared_kernel`` makes ``A + B`` singular, ``singular_b`` and
    ``range_in_b`` make ``B`` singular, the latter with ``rank(A + B) == rank(B)``.
    """
    sa, sb = 10.0 ** rng.uniform(-2, 2, size=2)
    if kind == "generic":
        return random_psd(rng, k, k, scale=sa), random_psd(rng, k, k, scale=sb)
    if kind == "singular_b":
        return random_psd(rng, k, int(rng.integers(1, k + 1)), scale=sa), \
            random_psd(rng, k, int(rng.integers(0, k)), scale=sb)
    if kind == "shared_kernel":
        p = int(rng.integers(1, k))
        Q = np.linalg.qr(rng.standard_normal((k, k)))[0][:, :p]
        return random_psd(rng, k, int(rng.integers(0, p + 1)), Q, sa), \
            random_psd(rng, k, int(rng.integers(0, p + 1)), Q, sb)
    if kind == "range_in_b":
        rb = int(rng.integers(1, k))
        F = rng.standard_normal((k, rb))
        B = sb * (F @ F.T)
        return random_psd(rng, k, int(rng.integers(0, rb + 1)), F, sa), B
    if kind == "low_rank":
        return random_psd(rng, k, int(rng.integers(0, k)), scale=sa), \
            random_psd(rng, k, int(rng.integers(0, k)), scale=sb)
    raise ValueError(kind)


def check_pencil_pair(A, B, tol: ToleranceConfig = DEFAULT_TOL) -> dict:
    """Residuals of one diagonalization against its defining properties."""
    D = simultaneous_diagonalize(A, B, tol)
    nA, nB = np.linalg.norm(A), np.linalg.norm(B)
    Ar, Br = D.reconstruct()
    scale = 1.0 + nA + nB
    recon = max(np.linalg.norm(Ar - A), np.linalg.norm(Br - B)) / scale
    U = D.T
    eq = 0.0
    for i in range(D.dim):
        r = np.linalg.norm(A @ U[:, i] * D.mu[i] - B @ U[:, i] * D.lam[i])
        eq = max(eq, r / (scale * max(np.linalg.norm(U[:, i]), 1e-300)))
    var = -np.inf
    for i in range(1, D.finite_count() + 1):
        var = max(var, variational_residual(D, A, B, i) / (1.0 + np.linalg.norm(A, 2)))
    out = {"reconstruction": recon, "eigen_equation": eq, "variational": var, "pinv_identity": None}
    if numerical_rank(A + B, tol) == numerical_rank(B, tol):
        Bp = pinv(B, tol)
        mu_pinv = np.where(D.mu > 0, 1.0 / np.where(D.mu > 0, D.mu, 1.0), 0.0)
        out["pinv_identity"] = np.linalg.norm(Bp - (U * mu_pinv) @ U.T) / (1.0 + np.linalg.norm(Bp))
    return out


def pencil_suite(replicates: int = 500, seed: int = 7, tol: ToleranceConfig = DEFAULT_TOL) -> dict:
    rng = np.random.default_rng(seed)
    stats = {"pairs": 0, "singular_b": 0, "singular_a_plus_b": 0, "pinv_identity_cases": 0}
    viol = {"reconstruction": 0, "eigen_equation": 0, "variational": 0, "pinv_identity": 0}
    worst = dict.fromkeys(viol, 0.0)
    for i in range(replicates):
        kind = PAIR_KINDS[i % len(PAIR_KINDS)]
        k = int(rng.integers(2, 9))
        A, B = random_psd_pair(rng, kind, k)
        stats["pairs"] += 1
        stats["singular_b"] += numerical_rank(B, tol) < k
        stats["singular_a_plus_b"] += numerical_rank(A + B, tol) < k
        res = check_pencil_pair(A, B, tol)
        viol["reconstruction"] += res["reconstruction"] > 1e-9
        viol["eigen_equation"] += res["eigen_equation"] > 1e-8
        viol["variational"] += res["variational"] > 1e-8
        if res["pinv_identity"] is not None:
            stats["pinv_identity_cases"] += 1
            viol["pinv_identity"] += res["pinv_identity"] > 1e-8
        for key in worst:
            if res[key] is not None:
                worst[key] = max(worst[key], float(res[key]))
    stats["violations"] = viol
    stats["worst"] = worst
    return stats


def multivariate_spec() -> ModelSpec:
    """n = 3 (error-free intercept plus two noisy regressors), d = 2, correlated errors."""
    S = 0.2 * (np.eye(4) + 0.3 * (np.ones((4, 4)) - np.eye(4)))
    sigma = np.zeros((5, 5))
    sigma[1:, 1:] = S
    return ModelSpec(
        x0=[[1.0, -0.5], [0.5, 2.0], [-1.0, 1.0]],
        sigma=sigma,
        regressors=RegressorLaw("uniform", 0.0, 3.0, intercept=True),
        errors=ErrorLaw("gaussian"),
    )


def sin_bound_sweep(spec: ModelSpec, replicates: int, m: int, seed: int,
                    tol: ToleranceConfig = DEFAULT_TOL) -> dict:
    rng = np.random.default_rng(seed)
    out = {"checked": 0, "violations": 0, "not_applicable": 0, "failed_estimates": 0}
    for _ in range(replicates):
        obs, truth = generate_dataset(spec, m, int(rng.integers(0, 2**63)))
        try:
            sol = estimate(obs, spec.sigma, tol)
            res = check_sin_bound(obs, truth, sol, spec.sigma, tol)
        except SingularN:
            out["not_applicable"] += 1
            continue
        except EivTlsError:
            out["failed_estimates"] += 1
            continue
        out["checked"] += 1
        out["violations"] += not res.holds
    return out


def perturbation_lemma_sweep(replicates: int, seed: int, k: int = 6, rel: float = 0.01,
                             tol: ToleranceConfig = DEFAULT_TOL) -> dict:
    rng = np.random.default_rng(seed)
    out = {"checked": 0, "violations": 0, "univariate": 0}
    for i in range(replicates):
        d = 1 if i % 2 == 0 else int(rng.integers(2, 4))
        Q = np.linalg.qr(rng.standard_normal((k, k)))[0]
        w = np.concatenate([np.zeros(d), rng.uniform(0.5, 5.0, k - d)])
        A = (Q * w) @ Q.T
        X0 = Q[:, :d] @ rng.standard_normal((d, d))
        B = random_psd(rng, k, k) + 0.1 * np.eye(k)
        E = rng.standard_normal((k, k))
        E = E + E.T
        E *= rel * np.min(w[d:]) / np.linalg.norm(E, 2)
        Xs = perturbed_minimizer(A, B, E, d, tol)
        res = check_perturbation_lemma(A, B, E, X0, Xs, tol)
        out["checked"] += 1
        out["univariate"] += d == 1
        out["violations"] += not res.holds
    return out


def xhat_bound_sweep(replicates: int, seed: int, tol: ToleranceConfig = DEFAULT_TOL) -> dict:
    """Random ``(A; B)`` near ``(X0; -I)`` with the angle below ``1/sqrt(1 + ||X0||^2)``."""
    rng = np.random.default_rng(seed)
    out = {"checked": 0, "violations": 0, "rejected": 0}
    while out["checked"] < replicates:
        n = int(rng.integers(1, 5))
        d = int(rng.integers(1, 4))
        X0 = rng.standard_normal((n, d)) * 10.0 ** rng.uniform(-1, 1)
        X0e = np.vstack([X0, -np.eye(d)])
        Y = X0e @ rng.standard_normal((d, d)) + 10.0 ** rng.uniform(-4, 0) * rng.standard_normal((n + d, d))
        x0n = float(np.linalg.norm(X0, 2))
        try:
            s = canonical_sines(Y, X0e, tol).max_sine
        except EivTlsError:
            out["rejected"] += 1
            continue
        bound = xhat_error_bound(s, x0n)
        if not math.isfinite(bound):
            out["rejected"] += 1
            continue
        lhs = float(np.linalg.norm(Y[:n] @ np.linalg.inv(Y[n:]) + X0, 2))
        out["checked"] += 1
        out["violations"] += lhs > bound + 1e-10 * (1.0 + bound)
    return out


def bounds_suite(replicates: int = 500, seed: int = 7, m: int = 1000,
                 tol: ToleranceConfig = DEFAULT_TOL) -> dict:
    return {
        "sin_bound_univariate": sin_bound_sweep(example21_spec(), replicates, m, seed, tol),
        "sin_bound_multivariate": sin_bound_sweep(multivariate_spec(), replicates, m, seed + 1, tol),
        "perturbation_lemma": perturbation_lemma_sweep(replicates, seed + 2, tol=tol),
        "xhat_error_bound": xhat_bound_sweep(replicates, seed + 3, tol),
    }


# ------------------------------------------------------------------ oracle suite


def random_tls_instance(rng, n, d, m, sigma, noise=0.3):
    X0 = rng.standard_normal((n, d))
    A0 = rng.standard_normal((m, n))
    F = factor_psd(sigma)
    E = noise * rng.standard_normal((m, F.shape[1])) @ F.T
    return ObservationSet(A0 + E[:, :n], A0 @ X0 + E[:, n:]), X0


def classical_oracle_sweep(replicates: int, seed: int, tol: ToleranceConfig = DEFAULT_TOL) -> dict:
    rng = np.random.default_rng(seed)
    out = {"checked": 0, "violations": 0, "skipped": 0, "worst": 0.0}
    while out["checked"] < replicates:
        n = int(rng.integers(1, 5))
        d = int(rng.integers(1, 7 - n))
        m = int(rng.integers(n + d + 2, 60))
        obs, _ = random_tls_instance(rng, n, d, m, np.eye(n + d), noise=10.0 ** rng.uniform(-3, 0))
        try:
            sol = estimate(obs, ErrorCovariance(np.eye(n + d)), tol)
            ref = classical_tls_oracle(obs, tol)
        except (GapTooSmall, NonGeneric):
            out["skipped"] += 1
            continue
        if not sol.uniqueness_gap > 1e-6 * sol.nu[d]:
            out["skipped"] += 1
            continue
        diff = float(np.linalg.norm(sol.x_hat - ref))
        out["checked"] += 1
        out["violations"] += diff > 1e-8
        out["worst"] = max(out["worst"], diff)
    return out


def brute_force_sweep(replicates: int, seed: int, tol: ToleranceConfig = DEFAULT_TOL) -> dict:
    rng = np.random.default_rng(seed)
    sigmas = [np.diag([0.0, 1.0]), np.eye(2)]
    out = {"checked": 0, "violations": 0, "worst": 0.0}
    for i in range(replicates):
        if i < len(sigmas):
            sigma = sigmas[i]
        else:
            sigma = random_psd(rng, 2, 2) + 0.05 * np.eye(2)
        a0 = rng.uniform(-2, 2, size=(40, 1))
        slope = rng.uniform(-3, 3)
        F = factor_psd(sigma)
        E = 0.2 * rng.standard_normal((40, F.shape[1])) @ F.T
        obs = ObservationSet(a0 + E[:, :1], slope * a0 + E[:, 1:])
        x_est = float(estimate(obs, ErrorCovariance(sigma), tol).x_hat[0, 0])
        x_grid = brute_force_tls(obs, sigma, -5.0, 5.0, 1e-4, tol)
        diff = abs(x_grid - x_est)
        out["checked"] += 1
        out["violations"] += diff > 2e-4
        out["worst"] = max(out["worst"], diff)
    return out


def criterion_identity_sweep(replicates: int, seed: int, tol: ToleranceConfig = DEFAULT_TOL) -> dict:
    rng = np.random.default_rng(seed)
    out = {"checked": 0, "violations": 0}
    while out["checked"] < replicates:
        n = int(rng.integers(1, 4))
        d = int(rng.integers(1, 4))
        m = int(rng.integers(n + d + 2, 80))
        k = n + d
        if rng.uniform() < 0.5:
            sigma = random_psd(rng, k, k) / k
        else:
            sigma = np.diag(np.concatenate([np.zeros(1), rng.uniform(0.1, 1.0, k - 1)]))
        obs, _ = random_tls_instance(rng, n, d, m, sigma)
        try:
            sol = estimate(obs, ErrorCovariance(sigma), tol)
        except EivTlsError:
            continue
        fro = criterion_frobenius(sol.delta, sigma, tol)
        spec = criterion_spectral(sol.delta, sigma, tol)
        target = math.sqrt(float(np.sum(sol.nu[:d])))
        ok = abs(fro - target) <= 1e-8 * (1 + target) and abs(spec - sol.nu[d - 1]) <= 1e-8 * (1 + sol.nu[d - 1])
        out["checked"] += 1
        out["violations"] += not ok
    return out


def oracle_suite(replicates: int = 200, seed: int = 7, tol: ToleranceConfig = DEFAULT_TOL) -> dict:
    return {
        "classical_tls": classical_oracle_sweep(replicates, seed, tol),
        "brute_force": brute_force_sweep(min(replicates, 20), seed + 1, tol),
        "criterion_identities": criterion_identity_sweep(min(replicates, 100), seed + 2, tol),
    }


SUITES = {"pencil": pencil_suite, "bounds": bounds_suite, "oracle": oracle_suite}


def total_violations(result) -> int:
    """Sum every ``violations`` entry in a (nested) suite result."""
    if isinstance(result, dict):
        total = 0
        for key, val in result.items():
            if key == "violations":
                total += sum(val.values()) if isinstance(val, dict) else int(val)
            elif isinstance(val, dict):
                total += total_violations(val)
        return total
    return 0
