"""Entrywise and marginal de Finetti bounds over the seeded mixture corpus
and the tail-saturating adversarial boxes.

    python3 scripts/run_corpus.py --seed 0 --count 1000
"""

import argparse
import time

from boxlab.corpus import mixture_corpus
from boxlab.definetti import (certify_first_definetti, certify_second_definetti,
                              diaconis_freedman_check)
from boxlab.threshold import adversarial_symbox


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--count", type=int, default=1000)
    ap.add_argument("--n-max", type=int, default=12)
    args = ap.parse_args(argv)

    t0 = time.perf_counter()
    corpus = mixture_corpus(args.seed, args.count, args.n_max)
    worst = max(certify_first_definetti(P).worst_ratio for P in corpus)
    adv = [certify_first_definetti(adversarial_symbox(n)) for n in range(1, args.n_max + 1)]
    print(f"entrywise: worst mixture ratio {float(worst):.4g}, "
          f"adversarial ratios {[round(float(c.worst_ratio), 4) for c in adv]}, "
          f"{time.perf_counter() - t0:.1f} s")

    t0 = time.perf_counter()
    bad2 = baddf = 0
    for P in corpus:
        for k in range(1, min(4, P.n) + 1):
            bad2 += not certify_second_definetti(P, k).passed
            baddf += not diaconis_freedman_check(P, k).passed
    print(f"marginal: {bad2} violations, sampling sub-bound: {baddf} violations, "
          f"{time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
