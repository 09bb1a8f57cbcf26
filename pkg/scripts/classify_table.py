"""Power-counting table for phi^k in a chosen spacetime dimension.

Usage: python3 scripts/classify_table.py [d] [k ...]
"""

import sys

from egren import classify_interaction


def main(argv):
    d = int(argv[0]) if argv else 4
    powers = [int(a) for a in argv[1:]] or [3, 4, 5, 6]
    for k in powers:
        rep = classify_interaction(d, [k], n_max=6)
        rhos = " ".join(str(row["rho"]) for row in rep.table)
        print(f"d={d} phi^{k}: {rep.verdict.value:18s} rho(n=2..) = {rhos}")


if __name__ == "__main__":
    main(sys.argv[1:])
