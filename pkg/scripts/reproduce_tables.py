"""Recompute the plethysm-versus-orbit tables for small (d, delta).

    python scripts/reproduce_tables.py            # d=3 up to 8, d=4 up to 6
    python scripts/reproduce_tables.py 4 7 -j 8   # one stretch case
"""

import argparse
import time

from bordercx.symrep import format_scan_subscript, obstruction_scan


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("d", type=int, nargs="?")
    ap.add_argument("delta", type=int, nargs="?")
    ap.add_argument("-j", "--jobs", type=int, default=1)
    args = ap.parse_args()
    cases = [(args.d, args.delta)] if args.d else [(3, k) for k in range(1, 9)] + [(4, k) for k in range(1, 7)]
    for d, delta in cases:
        t0 = time.time()
        rows = obstruction_scan(d, delta, jobs=args.jobs)
        body = format_scan_subscript(rows) if rows else "(empty)"
        print(f"d={d} delta={delta} [{time.time() - t0:.1f}s]: {body}")


if __name__ == "__main__":
    main()
