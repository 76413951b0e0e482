"""Command-line front end.

Exit codes: 0 success, 1 verification violation, 2 input error,
3 estimation failure (with a diagnostic JSON body).
"""
from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import EivTlsError, NoSolution, NonGeneric
from .harness import SCHEMA, ModelSpec, brute_force_tls, default_threads, run_consistency
from .linalg import ToleranceConfig
from .suites import SUITES, total_violations
from .tls import ErrorCovariance, ObservationSet, classical_tls_oracle, estimate

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT, EXIT_ESTIMATION = 0, 1, 2, 3


class InputError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def read_csv(path) -> np.ndarray:
    """Comma-separated numbers; a single header row is skipped if its first token is not numeric."""
    path = Path(path)
    if not path.is_file():
        raise InputError("missing_file", f"no such file: {path}")
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise InputError("bad_input", f"{path} is empty")
    try:
        float(lines[0].split(",")[0])
    except ValueError:
        lines = lines[1:]
    try:
        data = np.array([[float(tok) for tok in ln.split(",")] for ln in lines], dtype=float)
    except ValueError as exc:
        raise InputError("bad_input", f"{path}: {exc}") from exc
    if data.ndim != 2 or data.size == 0:
        raise InputError("bad_input", f"{path}: rows have unequal lengths")
    if not np.all(np.isfinite(data)):
        raise InputError("bad_input", f"{path}: non-finite values")
    return data


def _tol(args) -> ToleranceConfig:
    try:
        return ToleranceConfig(
            rel_rank_tol=args.tol_rank,
            gap_rtol=args.tol_gap if args.tol_gap is not None else 1e-8,
        )
    except ValueError as exc:
        raise InputError("bad_flags", str(exc)) from exc


def _emit(payload: dict, out=None):
    text = json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n"
    if out:
        Path(out).write_text(text)
    sys.stdout.write(text)


def _error_body(code, message):
    return {"schema": SCHEMA, "error": code, "message": message}


def _load_problem(args):
    if args.data is None or args.n is None:
        raise InputError("bad_flags", "--data and --n are required")
    C = read_csv(args.data)
    n = args.n
    d = args.d if args.d is not None else C.shape[1] - n
    if n < 1 or d < 1 or C.shape[1] != n + d:
        raise InputError("bad_input", f"data has {C.shape[1]} columns, expected n + d = {n + d}")
    return ObservationSet(C[:, :n], C[:, n:]), n, d


def _load_sigma(path, k, tol):
    S = read_csv(path)
    if S.shape != (k, k):
        raise InputError("bad_input", f"sigma must be {k}x{k}, got {S.shape[0]}x{S.shape[1]}")
    return ErrorCovariance(S, tol)


def cmd_estimate(args) -> int:
    tol = _tol(args)
    obs, n, d = _load_problem(args)
    if args.sigma is None:
        raise InputError("bad_flags", "--sigma is required")
    cov = _load_sigma(args.sigma, n + d, tol)
    try:
        sol = estimate(obs, cov, tol)
    except (NoSolution, NonGeneric) as exc:
        _emit(_error_body(exc.code, str(exc)), args.out)
        return EXIT_ESTIMATION
    _emit({"schema": SCHEMA, **sol.to_dict()}, args.out)
    return EXIT_OK


def _load_config(path) -> dict:
    p = Path(path)
    if not p.is_file():
        bundled = resources.files("eiv_tls") / "configs" / p.name
        if not bundled.is_file():
            raise InputError("missing_file", f"no such config: {path}")
        text = bundled.read_text()
    else:
        text = p.read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError("bad_config", f"{path}: {exc}") from exc


def _threads(args) -> int:
    if args.threads is not None:
        if args.threads < 1:
            raise InputError("bad_flags", "--threads must be >= 1")
        return args.threads
    return default_threads()


def cmd_simulate(args) -> int:
    tol = _tol(args)
    if args.config is None:
        raise InputError("bad_flags", "--config is required")
    cfg = _load_config(args.config)
    spec = ModelSpec.from_dict(cfg.get("model", cfg))
    run = cfg.get("run", {})
    sizes = args.sizes if args.sizes is not None else run.get("sample_sizes")
    replicates = args.replicates if args.replicates is not None else run.get("replicates", 100)
    seed = args.seed if args.seed is not None else run.get("seed", 0)
    if not sizes:
        raise InputError("bad_config", "no sample sizes given")
    if replicates < 1:
        raise InputError("bad_config", "replicates must be >= 1")
    report = run_consistency(spec, sizes, replicates, seed, threads=_threads(args), tol=tol)
    text = report.to_json()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    tol = _tol(args)
    if args.suite not in SUITES:
        raise InputError("bad_flags", f"unknown suite {args.suite!r}; choose from {sorted(SUITES)}")
    kwargs = {"tol": tol, "seed": 7 if args.seed is None else args.seed}
    if args.replicates is not None:
        if args.replicates < 1:
            raise InputError("bad_flags", "--replicates must be >= 1")
        kwargs["replicates"] = args.replicates
    result = SUITES[args.suite](**kwargs)
    violations = total_violations(result)
    _emit({"schema": SCHEMA, "suite": args.suite, "violations": violations, "result": result}, args.out)
    return EXIT_OK if violations == 0 else EXIT_VIOLATION


def cmd_oracle_compare(args) -> int:
    tol = _tol(args)
    obs, n, d = _load_problem(args)
    body = {"schema": SCHEMA}
    ok = True
    try:
        x_pencil = estimate(obs, ErrorCovariance(np.eye(n + d)), tol).x_hat
        x_svd = classical_tls_oracle(obs, tol)
    except EivTlsError as exc:
        _emit(_error_body(exc.code, str(exc)), args.out)
        return EXIT_ESTIMATION
    diff = float(np.linalg.norm(x_pencil - x_svd))
    body["classical"] = {"x_pencil": x_pencil.tolist(), "x_svd": x_svd.tolist(), "difference": diff}
    ok &= diff <= 1e-8 * (1.0 + float(np.linalg.norm(x_svd)))
    if args.sigma is not None and n == 1 and d == 1:
        cov = _load_sigma(args.sigma, 2, tol)
        try:
            x_est = float(estimate(obs, cov, tol).x_hat[0, 0])
            x_grid = brute_force_tls(obs, cov, tol=tol)
        except EivTlsError as exc:
            _emit(_error_body(exc.code, str(exc)), args.out)
            return EXIT_ESTIMATION
        body["brute_force"] = {"x_estimate": x_est, "x_grid": x_grid, "difference": abs(x_est - x_grid)}
        ok &= abs(x_est - x_grid) <= 2e-4
    body["agree"] = bool(ok)
    _emit(body, args.out)
    return EXIT_OK if ok else EXIT_VIOLATION


def _json_default(obj):
    if isinstance(obj, (np.integer, np.bool_)):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj) if np.isfinite(obj) else str(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _sizes(text):
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad --sizes {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eiv-tls", description="Total least squares with known error covariance.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data")
    common.add_argument("--sigma")
    common.add_argument("--n", type=int)
    common.add_argument("--d", type=int)
    common.add_argument("--out")
    common.add_argument("--config")
    common.add_argument("--seed", type=int)
    common.add_argument("--replicates", type=int)
    common.add_argument("--sizes", type=_sizes)
    common.add_argument("--suite")
    common.add_argument("--threads", type=int)
    common.add_argument("--tol-rank", type=float, dest="tol_rank")
    common.add_argument("--tol-gap", type=float, dest="tol_gap")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, help_ in [
        ("estimate", cmd_estimate, "estimate X from a CSV data file and a CSV covariance"),
        ("simulate", cmd_simulate, "run a consistency simulation from a JSON config"),
        ("verify", cmd_verify, "run a verification suite (pencil, bounds, oracle)"),
        ("oracle-compare", cmd_oracle_compare, "compare the estimator with independent oracles"),
    ]:
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        _emit(_error_body(exc.code, str(exc)), getattr(args, "out", None))
        return EXIT_INPUT
    except EivTlsError as exc:
        # malformed numbers (not PSD, bad dimensions, invalid spec) are input errors
        _emit(_error_body(exc.code, str(exc)), getattr(args, "out", None))
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
