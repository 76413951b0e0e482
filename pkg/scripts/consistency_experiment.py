"""Run the consistency experiment for a configuration and print the error medians.

    python3 scripts/consistency_experiment.py --config example21.json --out report.json
"""
import argparse
from pathlib import Path

from eiv_tls.cli import _load_config
from eiv_tls.harness import ModelSpec, run_consistency


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", default="example21.json")
    parser.add_argument("--replicates", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int)
    parser.add_argument("--out")
    args = parser.parse_args()

    cfg = _load_config(args.config)
    spec = ModelSpec.from_dict(cfg["model"])
    run = cfg["run"]
    report = run_consistency(
        spec,
        run["sample_sizes"],
        args.replicates or run["replicates"],
        run["seed"] if args.seed is None else args.seed,
        threads=args.threads,
    )
    print(f"{'m':>7} {'median err':>12} {'q95 err':>10} {'median sin':>11} {'fail':>5} {'non-unique':>10} {'bound viol':>10}")
    for s in report.sizes:
        q, sq = s.error_quantiles, s.sine_quantiles
        viol = sum(v["violations"] for v in s.bound_violations.values())
        print(f"{s.m:>7} {q['q50']:>12.5f} {q['q95']:>10.5f} {sq['q50']:>11.5f} {s.failures:>5} "
              f"{s.counts['non_unique']:>10} {viol:>10}")
    if args.out:
        Path(args.out).write_text(report.to_json())


if __name__ == "__main__":
    main()
