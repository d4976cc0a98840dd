"""Run the acceptance criteria and print one PASS/FAIL line per criterion.

Usage: python scripts/run_acceptance.py [--quick] [--only 1,5,9]
"""

import argparse
import sys

from rieszchaos.acceptance import CRITERIA, run_criterion


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--only", type=lambda s: [int(v) for v in s.split(",")])
    args = ap.parse_args()
    numbers = args.only or [c[0] for c in CRITERIA]
    ok = True
    for n in numbers:
        r = run_criterion(n, args.quick, args.threads)
        print(f"{r.line()}  [{r.seconds:.0f} s]", flush=True)
        ok &= r.passed
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
