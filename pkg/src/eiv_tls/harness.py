"""Monte Carlo harness for the errors-in-variables model ``B0 = A0 X0``.

Datasets are generated row-by-row as ``c_i = c0_i + L z_i`` with
``L L^T = Sigma`` and ``z_i`` standardized i.i.d. coordinates. Every replicate
is seeded by :func:`replicate_seed`, a fixed SplitMix64 chain, so results do
not depend on how replicates are scheduled across workers.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EivTlsError,
    Incompatible,
    InvalidSpec,
    NonGeneric,
    NoSolution,
    PreconditionViolated,
    SingularN,
)
from .linalg import DEFAULT_TOL, ToleranceConfig, gram, numerical_rank, psd_eigh, symmetrize
from .pencil import factor_psd, simultaneous_diagonalize
from .subspace import canonical_sines, xhat_error_bound
from .tls import (
    ErrorCovariance,
    ObservationSet,
    TlsSolution,
    criterion_frobenius,
    estimate,
    minimal_correction,
    minimal_correction_columns,
)

SCHEMA = "eiv-tls/1"
BOUND_SLACK = 1e-8

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One SplitMix64 step: add the golden gamma, then apply the finalizer."""
    z = (x + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def replicate_seed(base_seed: int, m: int, replicate: int) -> int:
    """``splitmix64(splitmix64(splitmix64(base) ^ m) ^ replicate)``, all mod 2**64."""
    h = splitmix64(base_seed & _MASK64)
    h = splitmix64(h ^ (m & _MASK64))
    return splitmix64(h ^ (replicate & _MASK64))


# --------------------------------------------------------------------------- model


@dataclass(frozen=True)
class RegressorLaw:
    """Rule producing the true regressors ``a0_i``.

    kind:
      ``uniform``  i.i.d. uniform on ``[low, high]``
      ``gaussian`` i.i.d. normal with mean ``low`` and standard deviation ``high``
      ``sequence`` deterministic Weyl sequence ``low + (high - low) * frac(i * phi_j)``
      ``fixed``    rows of a user-supplied ``matrix`` (needs at least m rows)

    With ``intercept`` a constant, error-free first column of ones is prepended
    and the law only generates the remaining ``n - 1`` columns.
    """

    kind: str = "uniform"
    low: float = 0.0
    high: float = 3.0
    intercept: bool = False
    matrix: tuple | None = None

    def generate(self, rng: np.random.Generator, m: int, n: int) -> np.ndarray:
        p = n - 1 if self.intercept else n
        if self.kind == "uniform":
            X = rng.uniform(self.low, self.high, size=(m, p))
        elif self.kind == "gaussian":
            X = rng.normal(self.low, self.high, size=(m, p))
        elif self.kind == "sequence":
            # irrational steps sqrt(prime) keep the columns linearly independent
            steps = np.sqrt(np.array([2, 3, 5, 7, 11, 13, 17, 19, 23, 29][:p], dtype=float))
            idx = np.arange(1, m + 1, dtype=float)[:, None]
            X = self.low + (self.high - self.low) * np.mod(idx * steps, 1.0)
        elif self.kind == "fixed":
            M = np.asarray(self.matrix, dtype=float)
            if M.shape[0] < m:
                raise InvalidSpec(f"fixed regressor matrix has {M.shape[0]} rows, need {m}")
            X = M[:m]
        else:
            raise InvalidSpec(f"unknown regressor law {self.kind!r}")
        if self.intercept:
            X = np.hstack([np.ones((m, 1)), X])
        return X

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "low": self.low, "high": self.high, "intercept": self.intercept}
        if self.matrix is not None:
            out["matrix"] = np.asarray(self.matrix).tolist()
        return out


@dataclass(frozen=True)
class ErrorLaw:
    """Standardized coordinate distribution (mean 0, variance 1).

    ``student_t`` is scaled by ``sqrt((df - 2) / df)``; it has finite moments
    only of order below ``df``.
    """

    family: str = "gaussian"
    df: float | None = None

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.family == "gaussian":
            return rng.standard_normal(size)
        if self.family == "student_t":
            return rng.standard_t(self.df, size) * math.sqrt((self.df - 2.0) / self.df)
        if self.family == "rademacher":
            return rng.integers(0, 2, size=size) * 2.0 - 1.0
        raise InvalidSpec(f"unknown error family {self.family!r}")

    def to_dict(self) -> dict:
        out = {"family": self.family}
        if self.df is not None:
            out["df"] = self.df
        return out


@dataclass(frozen=True)
class ModelSpec:
    x0: np.ndarray
    sigma: np.ndarray
    regressors: RegressorLaw = field(default_factory=RegressorLaw)
    errors: ErrorLaw = field(default_factory=ErrorLaw)
    moment_order_r: float = 2.0

    def __post_init__(self):
        try:
            x0 = np.atleast_2d(np.asarray(self.x0, dtype=float))
            sigma = ErrorCovariance(self.sigma).sigma
        except (ValueError, EivTlsError) as exc:
            raise InvalidSpec(str(exc)) from exc
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "sigma", sigma)
        n, d = x0.shape
        if sigma.shape != (n + d, n + d):
            raise InvalidSpec(f"sigma must be {(n + d, n + d)}, got {sigma.shape}")
        if self.regressors.intercept and n < 1:
            raise InvalidSpec("intercept needs n >= 1")
        if self.regressors.kind == "fixed":
            M = np.asarray(self.regressors.matrix, dtype=float)
            want = n - 1 if self.regressors.intercept else n
            if M.ndim != 2 or M.shape[1] != want:
                raise InvalidSpec(f"fixed regressor matrix must have {want} columns")
        if self.regressors.kind not in ("uniform", "gaussian", "sequence", "fixed"):
            raise InvalidSpec(f"unknown regressor law {self.regressors.kind!r}")
        if self.regressors.kind == "sequence" and n - int(self.regressors.intercept) > 10:
            raise InvalidSpec("sequence law supports at most 10 random columns")
        if self.moment_order_r < 1:
            raise InvalidSpec("moment_order_r must be >= 1")
        fam = self.errors.family
        if fam == "student_t":
            if self.errors.df is None or not self.errors.df > max(2.0, 2.0 * self.moment_order_r):
                raise InvalidSpec("student_t needs df > max(2, 2 r) for finite 2r-th moments")
        elif fam not in ("gaussian", "rademacher"):
            raise InvalidSpec(f"unknown error family {fam!r}")
        # Sigma = 0 is the noiseless model: no identifiability condition is needed
        if np.any(sigma) and numerical_rank(sigma @ self.x_ext) != d:
            raise InvalidSpec("rank(Sigma X0_ext) must equal d")

    @property
    def n(self) -> int:
        return self.x0.shape[0]

    @property
    def d(self) -> int:
        return self.x0.shape[1]

    @property
    def x_ext(self) -> np.ndarray:
        return np.vstack([self.x0, -np.eye(self.d)])

    def to_dict(self) -> dict:
        return {
            "x0": self.x0.tolist(),
            "sigma": self.sigma.tolist(),
            "regressors": self.regressors.to_dict(),
            "errors": self.errors.to_dict(),
            "moment_order_r": self.moment_order_r,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelSpec":
        try:
            reg = dict(data.get("regressors", {}))
            if "matrix" in reg:
                reg["matrix"] = tuple(map(tuple, reg["matrix"]))
            return cls(
                x0=data["x0"],
                sigma=data["sigma"],
                regressors=RegressorLaw(**reg),
                errors=ErrorLaw(**data.get("errors", {})),
                moment_order_r=float(data.get("moment_order_r", 2.0)),
            )
        except (KeyError, TypeError) as exc:
            raise InvalidSpec(f"malformed model spec: {exc}") from exc


def example21_spec(beta0=1.0, beta1=2.0, sigma_delta=0.5, sigma_eps=0.5, family="gaussian") -> ModelSpec:
    """Univariate regression with intercept; the constant regressor is error-free."""
    return ModelSpec(
        x0=[[beta0], [beta1]],
        sigma=np.diag([0.0, sigma_delta**2, sigma_eps**2]),
        regressors=RegressorLaw("uniform", 0.0, 3.0, intercept=True),
        errors=ErrorLaw(family),
    )


@dataclass(frozen=True)
class GroundTruth:
    A0: np.ndarray
    B0: np.ndarray
    X0: np.ndarray

    @property
    def C0(self) -> np.ndarray:
        return np.hstack([self.A0, self.B0])

    @property
    def x_ext(self) -> np.ndarray:
        return np.vstack([self.X0, -np.eye(self.X0.shape[1])])


def generate_dataset(spec: ModelSpec, m: int, seed: int):
    """Draw one dataset; deterministic in ``(spec, m, seed)``."""
    if m < 1:
        raise InvalidSpec("sample size must be >= 1")
    rng = np.random.default_rng(seed)
    A0 = spec.regressors.generate(rng, m, spec.n)
    B0 = A0 @ spec.x0
    L = factor_psd(spec.sigma)
    z = spec.errors.draw(rng, (m, L.shape[1]))
    E = z @ L.T
    n = spec.n
    obs = ObservationSet(A0 + E[:, :n], B0 + E[:, n:])
    return obs, GroundTruth(A0, B0, spec.x0)


# ----------------------------------------------------------------------- checks


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float
    holds: bool
    epsilon: float | None = None
    detail: dict = field(default_factory=dict)


def _inv_sqrt_pd(N):
    w, V = np.linalg.eigh(symmetrize(N))
    return (V / np.sqrt(w)) @ V.T


def check_sin_bound(obs: ObservationSet, truth: GroundTruth, solution: TlsSolution, sigma,
                    tol: ToleranceConfig = DEFAULT_TOL) -> BoundCheck:
    """Check the rescaled eigenvector-perturbation bound on a realized dataset.

    With ``N = C0^T C0 + lambda_min(A0^T A0) I`` and
    ``eps = ||N^{-1/2} (C^T C - m Sigma - C0^T C0) N^{-1/2}||`` the chain

        sin^2(X_ext, X0_ext) <= sin^2(N^{1/2} X_ext, N^{1/2} X0_ext)
                             <= 2 eps (1 + ||Sigma|| lambda_max(inv(X0^T Sigma X0) X0^T X0))

    must hold (``X0`` here being the extended true matrix). For ``d = 1`` the
    intermediate univariate form with the ``x_hat``-dependent factor
    ``x_hat^T Sigma x_hat / x_hat^T x_hat`` is checked as well.

    Raises
    ------
    SingularN
        If ``lambda_min(A0^T A0) <= abs_floor``.
    """
    sigma = ErrorCovariance(sigma).sigma if not isinstance(sigma, ErrorCovariance) else sigma.sigma
    lam_a0 = float(np.linalg.eigvalsh(gram(truth.A0))[0])
    if lam_a0 <= tol.abs_floor:
        raise SingularN(f"lambda_min(A0^T A0) = {lam_a0:.3e}")
    C0tC0 = gram(truth.C0)
    k = C0tC0.shape[0]
    N = C0tC0 + lam_a0 * np.eye(k)
    Nih = _inv_sqrt_pd(N)
    pert = gram(obs.C) - obs.m * sigma - C0tC0
    eps = float(np.linalg.norm(Nih @ pert @ Nih, 2))

    X0e = truth.x_ext
    Xe = solution.x_ext
    lhs = canonical_sines(Xe, X0e, tol).max_sine ** 2
    Nh = np.linalg.inv(Nih)
    lhs_rescaled = canonical_sines(Nh @ Xe, Nh @ X0e, tol).max_sine ** 2
    s_norm = float(np.linalg.norm(sigma, 2))
    noiseless = s_norm == 0.0
    if noiseless:
        # the Sigma-weighted factor vanishes with Sigma itself
        ratio = 0.0
    else:
        ratio = float(np.max(np.linalg.eigvals(np.linalg.solve(X0e.T @ sigma @ X0e, X0e.T @ X0e)).real))
    rhs = 2.0 * eps * (1.0 + s_norm * ratio)
    holds = lhs <= lhs_rescaled + BOUND_SLACK and lhs_rescaled <= rhs + BOUND_SLACK
    detail = {"lhs_rescaled": lhs_rescaled, "lambda_min_a0": lam_a0}
    if solution.x_ext.shape[1] == 1:
        x = Xe[:, 0]
        x0 = X0e[:, 0]
        weight = 0.0 if noiseless else (x0 @ x0) / (x0 @ sigma @ x0) * (x @ sigma @ x) / (x @ x)
        rhs_uni = 2.0 * eps * (1.0 + weight)
        detail["rhs_univariate"] = rhs_uni
        holds = holds and lhs_rescaled <= rhs_uni + BOUND_SLACK and rhs_uni <= rhs + BOUND_SLACK
    return BoundCheck(lhs=lhs, rhs=rhs, holds=bool(holds), epsilon=eps, detail=detail)


def check_perturbation_lemma(A, B, Atilde, X0, X_star, tol: ToleranceConfig = DEFAULT_TOL) -> BoundCheck:
    """Generalized-eigenvector perturbation bound.

    ``A X0 = 0`` with ``lambda_{d+1}(A) > 0``; ``X_star`` minimizes
    ``lambda_max(inv(X^T B X) X^T (A + Atilde) X)``. Then

        sin^2(X_star, X0) <= ||Atilde|| / lambda_{d+1}(A) * (1 + ||B|| lambda_max(inv(X0^T B X0) X0^T X0)).

    For ``d = 1`` the sharper form with ``x_star^T B x_star / ||x_star||^2`` in
    place of ``||B||`` is checked too.
    """
    A = symmetrize(A, "A")
    B = symmetrize(B, "B")
    At = symmetrize(Atilde, "Atilde")
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    Xs = np.atleast_2d(np.asarray(X_star, dtype=float))
    if X0.shape[0] != A.shape[0]:
        X0, Xs = X0.T, Xs.T
    d = X0.shape[1]
    wA = np.linalg.eigvalsh(A)
    scale = 1.0 + float(np.max(np.abs(wA)))
    if np.linalg.norm(A @ X0) > 1e-8 * scale * np.linalg.norm(X0):
        raise PreconditionViolated("A X0 != 0")
    if wA[0] < -1e-8 * scale or not wA[d] > 1e-8 * scale:
        raise PreconditionViolated("A must have exactly d zero eigenvalues, the rest positive")
    try:
        psd_eigh(B, tol, "B")
    except EivTlsError as exc:
        raise PreconditionViolated(str(exc)) from exc
    G0 = X0.T @ B @ X0
    if numerical_rank(G0, tol) != d or numerical_rank(Xs, tol) != d:
        raise PreconditionViolated("X0^T B X0 singular or X_star rank deficient")

    lhs = canonical_sines(Xs, X0, tol).max_sine ** 2
    factor = float(np.linalg.norm(At, 2)) / float(wA[d])
    ratio = float(np.max(np.linalg.eigvals(np.linalg.solve(G0, X0.T @ X0)).real))
    rhs = factor * (1.0 + float(np.linalg.norm(B, 2)) * ratio)
    holds = lhs <= rhs + BOUND_SLACK
    detail = {}
    if d == 1:
        x, x0 = Xs[:, 0], X0[:, 0]
        rhs_uni = factor * (1.0 + (x0 @ x0) / (x0 @ B @ x0) * (x @ B @ x) / (x @ x))
        detail["rhs_univariate"] = rhs_uni
        holds = holds and lhs <= rhs_uni + BOUND_SLACK
    return BoundCheck(lhs=lhs, rhs=rhs, holds=bool(holds), detail=detail)


def perturbed_minimizer(A, B, Atilde, d: int, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Minimizer of ``lambda_max(inv(X^T B X) X^T (A + Atilde) X)`` for positive definite ``B``.

    Shifting by ``c B`` makes the pencil PSD without moving its eigenvectors,
    so the ``d`` leading columns from :func:`simultaneous_diagonalize` apply.
    """
    B = symmetrize(B, "B")
    P = symmetrize(np.asarray(A) + np.asarray(Atilde), "A + Atilde")
    wB = np.linalg.eigvalsh(B)
    if not wB[0] > tol.rank_tol(B.shape) * wB[-1]:
        raise PreconditionViolated("B must be positive definite")
    Bih = _inv_sqrt_pd(B)
    c = max(0.0, -float(np.linalg.eigvalsh(Bih @ P @ Bih)[0])) * 1.01 + 1e-12
    pen = simultaneous_diagonalize(P + c * B, B, tol)
    return pen.T[:, :d]


def brute_force_tls(obs: ObservationSet, sigma, lo: float = -5.0, hi: float = 5.0, step: float = 1e-4,
                    tol: ToleranceConfig = DEFAULT_TOL, chunk: int = 4096) -> float:
    """Grid search of the Frobenius criterion over ``X = (x; -1)`` (``n = d = 1``).

    Every grid point gets its own minimal correction (vectorized in chunks);
    the criterion at the winner is re-evaluated through the scalar
    :func:`minimal_correction` / :func:`criterion_frobenius` path.
    """
    if obs.n != 1 or obs.d != 1:
        raise ValueError("brute_force_tls needs n = d = 1")
    sig = sigma.sigma if isinstance(sigma, ErrorCovariance) else ErrorCovariance(sigma).sigma
    from .linalg import psd_pinv_sqrt

    R = psd_pinv_sqrt(sig, tol)
    C = obs.C
    grid = lo + step * np.arange(int(round((hi - lo) / step)) + 1)
    best_val, best_x = np.inf, None
    for start in range(0, grid.size, chunk):
        xs = grid[start:start + chunk]
        X = np.stack([xs, -np.ones_like(xs)], axis=1)
        deltas, feasible = minimal_correction_columns(C, sig, X, tol)
        vals = np.sqrt(np.einsum("gmk,gmk->g", deltas @ R, deltas @ R))
        vals = np.where(feasible, vals, np.inf)
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val, best_x = float(vals[i]), float(xs[i])
    if best_x is None:
        raise Incompatible("no grid point admits a feasible correction")
    check = criterion_frobenius(minimal_correction(C, sig, np.array([[best_x], [-1.0]]), tol), sig, tol)
    if not math.isclose(check, best_val, rel_tol=1e-8, abs_tol=1e-12):
        raise ArithmeticError(f"batched criterion {best_val!r} disagrees with scalar {check!r}")
    return best_x


# ---------------------------------------------------------------- consistency run

OUTCOMES = ("ok", "non_unique", "no_solution", "non_generic", "other_error")
QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


@dataclass(frozen=True)
class ReplicateResult:
    m: int
    replicate: int
    seed: int
    outcome: str
    error: float | None
    max_sine: float | None
    lambda_min_a0: float
    sin_bound: bool | None
    xhat_bound: bool | None


def _one_replicate(spec: ModelSpec, m: int, r: int, base_seed: int, tol: ToleranceConfig) -> ReplicateResult:
    seed = replicate_seed(base_seed, m, r)
    obs, truth = generate_dataset(spec, m, seed)
    lam_a0 = float(np.linalg.eigvalsh(gram(truth.A0))[0])
    try:
        sol = estimate(obs, spec.sigma, tol)
    except NoSolution:
        return ReplicateResult(m, r, seed, "no_solution", None, None, lam_a0, None, None)
    except NonGeneric:
        return ReplicateResult(m, r, seed, "non_generic", None, None, lam_a0, None, None)
    except EivTlsError:
        return ReplicateResult(m, r, seed, "other_error", None, None, lam_a0, None, None)
    err = float(np.linalg.norm(sol.x_hat - spec.x0))
    s = canonical_sines(sol.x_ext, spec.x_ext, tol).max_sine
    try:
        sin_ok = check_sin_bound(obs, truth, sol, spec.sigma, tol).holds
    except SingularN:
        sin_ok = None
    bound = xhat_error_bound(s, float(np.linalg.norm(spec.x0, 2)))
    xhat_ok = None
    if math.isfinite(bound):
        xhat_ok = float(np.linalg.norm(sol.x_hat - spec.x0, 2)) <= bound + 1e-10
    outcome = "ok" if sol.unique else "non_unique"
    return ReplicateResult(m, r, seed, outcome, err, s, lam_a0, sin_ok, xhat_ok)


def _quantiles(values):
    if not values:
        return None
    q = np.quantile(np.asarray(values), QUANTILES)
    return {f"q{int(round(p * 100)):02d}": float(v) for p, v in zip(QUANTILES, q)}


def _bound_counts(flags):
    return {
        "checked": sum(f is not None for f in flags),
        "violations": sum(f is False for f in flags),
        "not_applicable": sum(f is None for f in flags),
    }


@dataclass(frozen=True)
class SizeReport:
    m: int
    replicates: int
    error_quantiles: dict | None
    sine_quantiles: dict | None
    counts: dict
    bound_violations: dict
    lambda_min_a0: dict
    errors: list
    seeds: list

    @property
    def median_error(self) -> float | None:
        return None if self.error_quantiles is None else self.error_quantiles["q50"]

    @property
    def failures(self) -> int:
        return self.counts["no_solution"] + self.counts["non_generic"]

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "replicates": self.replicates,
            "error_quantiles": self.error_quantiles,
            "sine_quantiles": self.sine_quantiles,
            "counts": self.counts,
            "bound_violations": self.bound_violations,
            "lambda_min_a0": self.lambda_min_a0,
            "errors": self.errors,
            "seeds": self.seeds,
        }


@dataclass(frozen=True)
class SimulationReport:
    spec: ModelSpec
    base_seed: int
    replicates: int
    sizes: tuple

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "kind": "simulation_report",
            "model": self.spec.to_dict(),
            "base_seed": self.base_seed,
            "replicates": self.replicates,
            "sample_sizes": [s.m for s in self.sizes],
            "sizes": [s.to_dict() for s in self.sizes],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _summarize(m, results) -> SizeReport:
    counts = {k: 0 for k in OUTCOMES}
    for res in results:
        counts[res.outcome] += 1
    errs = [res.error for res in results if res.error is not None]
    sines = [res.max_sine for res in results if res.max_sine is not None]
    lam = [res.lambda_min_a0 for res in results]
    return SizeReport(
        m=m,
        replicates=len(results),
        error_quantiles=_quantiles(errs),
        sine_quantiles=_quantiles(sines),
        counts=counts,
        bound_violations={
            "sin_bound": _bound_counts([res.sin_bound for res in results if res.error is not None]),
            "xhat_error_bound": _bound_counts([res.xhat_bound for res in results if res.error is not None]),
        },
        lambda_min_a0={"min": float(min(lam)), "median": float(np.median(lam))},
        errors=[res.error for res in results],
        seeds=[res.seed for res in results],
    )


def default_threads() -> int:
    env = os.environ.get("EIV_TLS_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_consistency(spec: ModelSpec, sample_sizes, replicates: int, base_seed: int,
                    threads: int | None = None, tol: ToleranceConfig = DEFAULT_TOL) -> SimulationReport:
    """Run ``replicates`` estimates at every sample size and aggregate them.

    The report is a pure function of the arguments other than ``threads``.
    """
    sizes = [int(m) for m in sample_sizes]
    if not sizes or any(m < 1 for m in sizes) or sizes != sorted(sizes):
        raise InvalidSpec("sample_sizes must be a non-empty ascending list of positive integers")
    if replicates < 1:
        raise InvalidSpec("replicates must be >= 1")
    tasks = [(m, r) for m in sizes for r in range(replicates)]
    threads = threads or default_threads()

    def run(task):
        return _one_replicate(spec, task[0], task[1], base_seed, tol)

    if threads == 1:
        results = [run(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, tasks))
    results.sort(key=lambda res: (res.m, res.replicate))
    per_size = tuple(_summarize(m, [res for res in results if res.m == m]) for m in sizes)
    return SimulationReport(spec=spec, base_seed=base_seed, replicates=replicates, sizes=per_size)
