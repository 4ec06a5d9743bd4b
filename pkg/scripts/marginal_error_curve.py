"""Marginal de Finetti error bound as a function of n, written as CSV.

    python3 scripts/marginal_error_curve.py --k 4 -o curve.csv [--lhs]

--lhs adds the exact distance for a two-component mixture of iid CHSH
boxes (slow above n = 2^11).
"""

import argparse
import sys
from fractions import Fraction

from boxlab.boxes import symbox_iid, symbox_mix
from boxlab.definetti import certify_second_definetti, second_rhs
from boxlab.fileio import write_report

NS = tuple(2**e for e in range(4, 13))


def sample_box(n):
    half = Fraction(1, 2)
    return symbox_mix([symbox_iid(Fraction(3, 4), n), symbox_iid(half, n)], [half, half])


def curve_rows(k=4, ns=NS, lhs=False):
    rows = []
    for n in ns:
        row = [n, k, f"{second_rhs(n, k):.17g}"]
        if lhs:
            rep = certify_second_definetti(sample_box(n), k)
            row += [rep.lhs, "pass" if rep.passed else "fail"]
        rows.append(tuple(row))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", type=int, default=4)
    ap.add_argument("--lhs", action="store_true")
    ap.add_argument("-o", "--output")
    args = ap.parse_args(argv)
    cols = [("n", False), ("k", False), ("rhs", False)]
    if args.lhs:
        cols += [("lhs", True), ("verdict", False)]
    text = write_report(curve_rows(args.k, NS, args.lhs), cols, args.output)
    if not args.output:
        sys.stdout.write(text)


if __name__ == "__main__":
    main()
