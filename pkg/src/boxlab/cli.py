"""Command-line front end.

Exit codes: 0 pass, 1 bound violated, 2 precondition or usage error.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
import time
from fractions import Fraction

from . import config
from .boxes import CHSH, BoxError, SymBox, dense_from_sym, sym_from_dense
from .channels import (ALICE, PatternCapError, counterexample_channels, diamond_over_polytope,
                       verify_counterexample)
from .definetti import (certify_first_definetti, certify_general_definetti,
                        certify_second_definetti, diaconis_freedman_check, tau_chsh)
from .fileio import (FormatError, box_to_json, channels_from_json, channels_to_json, dump_scalar,
                     exact_str, family_from_json, load_box, load_json, mu_from_json, predicate_from_json,
                     save_box, save_json, write_report)
from .linprog import extension_polytope, ns_polytope, round_ns_polytope
from .numerics import DomainError, PreconditionError, SupportError

EXIT_PASS, EXIT_FAIL, EXIT_PRECONDITION = 0, 1, 2


class UsageError(Exception):
    pass


def _symbox(obj) -> SymBox:
    if isinstance(obj, SymBox):
        return obj
    try:
        return sym_from_dense(obj)
    except BoxError as e:
        raise PreconditionError(f"box is not CHSH symmetric: {e}") from e


def _verdict(passed: bool, label: str) -> int:
    print(f"{label}: {'pass' if passed else 'FAIL'}")
    return EXIT_PASS if passed else EXIT_FAIL


# --- commands --------------------------------------------------------------------------

def cmd_tau(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    tau = tau_chsh(args.n)
    save_box(dense_from_sym(tau) if args.dense else tau, args.output)
    return EXIT_PASS


def cmd_cert1(args) -> int:
    cert = certify_first_definetti(load_box(args.input))
    rows = [(k, lhs, bound, bound - lhs) for k, lhs, bound in cert.rows]
    if args.report:
        write_report(rows, [("k", False), ("lhs", True), ("rhs", True), ("slack", True)], args.report)
    print(f"prefactor {cert.prefactor}, worst ratio {float(cert.worst_ratio):.6g} at k={cert.witness}")
    return _verdict(cert.passed, "cert1")


def cmd_cert2(args) -> int:
    rep = certify_second_definetti(_symbox(load_box(args.input)), args.k, tol=args.tol)
    if args.report:
        slack = rep.rhs - float(rep.lhs)
        write_report([(args.k, rep.lhs, rep.rhs, slack)],
                     [("k", False), ("lhs", True), ("rhs", True), ("slack", True)], args.report)
    print(f"lhs {exact_str(rep.lhs)} ~ {float(rep.lhs):.6g}, rhs {rep.rhs:.6g}")
    return _verdict(rep.passed, "cert2")


def cmd_dfcheck(args) -> int:
    rep = diaconis_freedman_check(_symbox(load_box(args.input)), args.k)
    if args.report:
        write_report([(args.k, rep.lhs, rep.rhs, rep.rhs - rep.lhs)],
                     [("k", False), ("lhs", True), ("rhs", True), ("slack", True)], args.report)
    print(f"lhs {dump_scalar(rep.lhs)}, rhs {dump_scalar(rep.rhs)}")
    return _verdict(rep.passed, "dfcheck")


def cmd_threshold(args) -> int:
    from .threshold import check_chsh_threshold

    rep = check_chsh_threshold(_symbox(load_box(args.input)))
    if args.report:
        write_report([(r.k, r.observed, r.bound, r.slack) for r in rep.rows],
                     [("k", False), ("lhs", True), ("rhs", True), ("slack", True)], args.report)
    if rep.worst is not None:
        print(f"tightest k={rep.worst.k} ({rep.worst.kind}), slack {float(rep.worst.slack):.6g}")
    return _verdict(rep.passed, "threshold")


def _polytope(spec: str, n: int, E, args):
    X, A = E.x_count, E.a_count
    if X == 2**n and A == 2**n:
        parties = ALICE
    elif X == 4**n and A == 4**n:
        parties = CHSH
    else:
        raise UsageError(f"channel alphabets {X}x{A} fit neither one nor two parties at n={n}")
    alph = parties.with_eve(args.eve_in, args.eve_out)
    if spec == "ns":
        return ns_polytope(n, alph)
    if spec == "roundns":
        return round_ns_polytope(n, alph)
    if spec.startswith("ext:"):
        tau = load_box(spec[4:])
        tau = dense_from_sym(tau) if isinstance(tau, SymBox) else tau
        if tau.n != n:
            raise UsageError(f"tau file has n={tau.n}, expected {n}")
        return extension_polytope(tau, args.eve_out, args.eve_in)
    raise UsageError(f"unknown polytope {spec!r}; use ns, roundns or ext:FILE")


def cmd_diamond(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    E, F = channels_from_json(load_json(args.channels))
    poly = _polytope(args.polytope, args.n, E, args)
    rep = diamond_over_polytope(E, F, poly, method=args.method)
    print(json.dumps({"value": dump_scalar(rep.value), "decimal": f"{float(rep.value):.17g}",
                      "patterns": rep.patterns}))
    if args.witness:
        save_json(box_to_json(rep.witness), args.witness)
    return EXIT_PASS


def cmd_counterexample(args) -> int:
    if args.save_channels:
        cx = counterexample_channels(args.n, args.m)
        save_json(channels_to_json(cx.E, cx.F), args.save_channels)
    rep = verify_counterexample(args.n, args.m, method=args.method)
    doc = {"n": rep.n, "m": rep.m,
           "roundns_value": dump_scalar(rep.roundns_value),
           "q_value": dump_scalar(rep.q_value),
           "twirled_value": dump_scalar(rep.twirled_value),
           "pr_estar": dump_scalar(rep.pr_estar),
           "runtime": round(rep.runtime, 3),
           "passed": rep.passed}
    if args.full:
        doc["delta"] = [[dump_scalar(v) for v in row] for row in rep.delta]
    save_json(doc, args.output)
    return EXIT_PASS if rep.passed else EXIT_FAIL


def cmd_general(args) -> int:
    try:
        pred = predicate_from_json(load_json(args.pred))
    except BoxError as e:
        raise FormatError(f"malformed predicate: {e}") from e
    family = family_from_json(load_json(args.family))
    mu = mu_from_json(load_json(args.mu))
    P = load_box(args.input)
    try:
        C = Fraction(args.C)
    except ValueError as e:
        raise UsageError(f"--C must be a rational, got {args.C!r}") from e
    cert = certify_general_definetti(P, pred, family, mu, C=C, grid=args.grid)
    if args.report:
        rows = [(" ".join(map(str, c)), lhs, bound, bound - lhs) for c, lhs, bound in cert.part1.rows]
        write_report(rows, [("k", False), ("lhs", True), ("rhs", True), ("slack", True)], args.report)
    print(f"prefactor {cert.prefactor}, frequency-level worst ratio {float(cert.part1.worst_ratio):.6g}")
    if cert.part2 is not None:
        print(f"entry-level worst ratio {float(cert.part2.worst_ratio):.6g}")
    if cert.diagnostic is not None:
        d = cert.diagnostic
        print(f"grid diagnostic: min ratio {d.min_ratio:.6g}, error bar {d.error_bar:.3g}")
    return _verdict(cert.passed, "general")


def cmd_corpus(args) -> int:
    """Seeded mixture corpus through cert1, cert2 and dfcheck."""
    from .corpus import mixture_corpus

    start, bad = time.perf_counter(), 0
    corpus = mixture_corpus(args.seed, args.count, args.n_max)
    for i, sym in enumerate(corpus):
        ok = certify_first_definetti(sym).passed
        for k in range(1, min(4, sym.n) + 1):
            ok = ok and certify_second_definetti(sym, k, tol=args.tol).passed
            ok = ok and diaconis_freedman_check(sym, k).passed
        if not ok:
            bad += 1
            print(f"violation at corpus item {i} (n={sym.n})")
    print(f"{len(corpus)} boxes, {bad} violations, {time.perf_counter() - start:.1f} s")
    return EXIT_PASS if bad == 0 else EXIT_FAIL


# --- parser ------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for randomized commands")
    common.add_argument("--tol", type=float, default=None,
                        help="relative tolerance where floats are unavoidable (default 1e-9)")

    p = argparse.ArgumentParser(prog="boxlab", parents=[common],
                                description="Exact certificates for nonlocal boxes.")
    sub = p.add_subparsers(dest="cmd", required=True)

    def add(name, fn, help_):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.set_defaults(fn=fn)
        return s

    s = add("tau", cmd_tau, "write the CHSH de Finetti box")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--dense", action="store_true", help="write every entry, not win-count weights")
    s.add_argument("-o", "--output", default="-")

    for name, fn, help_, needs_k in (
            ("cert1", cmd_cert1, "entrywise de Finetti bound", False),
            ("cert2", cmd_cert2, "bound on k-round marginals", True),
            ("threshold", cmd_threshold, "win-count tail bounds", False),
            ("dfcheck", cmd_dfcheck, "sampling with vs without replacement", True)):
        s = add(name, fn, help_)
        s.add_argument("-i", "--input", required=True)
        s.add_argument("--report", help="CSV report path")
        if needs_k:
            s.add_argument("--k", type=int, required=True)

    s = add("diamond", cmd_diamond, "channel distance over a box polytope")
    s.add_argument("--channels", required=True)
    s.add_argument("--polytope", required=True, help="ns, roundns or ext:TAU.json")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--eve-in", type=int, default=1)
    s.add_argument("--eve-out", type=int, default=2)
    s.add_argument("--method", choices=("auto", "exact", "certified"), default="auto")
    s.add_argument("--witness", help="write the optimal box here")

    s = add("counterexample", cmd_counterexample, "channels no round-wise attack separates")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--full", action="store_true", help="include the difference vector")
    s.add_argument("--method", choices=("auto", "exact", "certified"), default="auto")
    s.add_argument("--save-channels", help="write the channel pair as JSON")
    s.add_argument("-o", "--output", default="-")

    s = add("general", cmd_general, "de Finetti bound for a general predicate")
    s.add_argument("--family", required=True)
    s.add_argument("--pred", required=True)
    s.add_argument("--mu", required=True)
    s.add_argument("-i", "--input", required=True)
    s.add_argument("--C", default="1")
    s.add_argument("--grid", type=int, default=64)
    s.add_argument("--report")

    s = add("corpus", cmd_corpus, "run the seeded mixture corpus")
    s.add_argument("--count", type=int, default=1000)
    s.add_argument("--n-max", type=int, default=12)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_PRECONDITION if e.code else EXIT_PASS
    if args.tol is not None:
        config.configure(tol=args.tol)
    random.seed(args.seed)
    try:
        return args.fn(args)
    except (UsageError, FormatError, PreconditionError, DomainError, SupportError,
            BoxError, PatternCapError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
