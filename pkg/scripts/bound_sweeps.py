"""Run the randomized verification suites and print their counts.

    python3 scripts/bound_sweeps.py --replicates 2000 --seed 11
"""
import argparse
import json
import time

from eiv_tls.suites import SUITES, total_violations


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--suites", default="pencil,bounds,oracle")
    parser.add_argument("--replicates", type=int, default=500)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    total = 0
    for name in args.suites.split(","):
        start = time.perf_counter()
        result = SUITES[name](replicates=args.replicates, seed=args.seed)
        violations = total_violations(result)
        total += violations
        print(f"== {name}: {violations} violations in {time.perf_counter() - start:.1f} s")
        print(json.dumps(result, indent=2, default=float))
    raise SystemExit(1 if total else 0)


if __name__ == "__main__":
    main()
