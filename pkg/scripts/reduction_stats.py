"""Regression tracker for rewrite output sizes.

Reduces a seeded corpus and prints size growth statistics; nothing is
asserted, the numbers are for eyeballing drift across revisions.
"""

import argparse
import statistics
import time

from bqlcd.proofgen import generate_corpus
from bqlcd.proofkernel import proof_size, stratum
from bqlcd.transform import reduce_proof


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--size", type=int, default=200)
    args = ap.parse_args()

    corpus = generate_corpus(seed=args.seed, size=args.size)
    rows = []
    t0 = time.perf_counter()
    for t in corpus:
        red = reduce_proof(t)
        rows.append((stratum(t), proof_size(t), proof_size(red.proof)))
    elapsed = time.perf_counter() - t0

    print(f"{len(rows)} proofs reduced in {elapsed:.2f}s")
    for s in sorted({r[0] for r in rows}):
        grp = [r for r in rows if r[0] == s]
        growth = [out / max(inp, 1) for _, inp, out in grp]
        print(f"  stratum {s:>2}: n={len(grp):<4} "
              f"in avg {statistics.mean(r[1] for r in grp):6.1f}  "
              f"out avg {statistics.mean(r[2] for r in grp):8.1f}  "
              f"growth median {statistics.median(growth):6.1f}x "
              f"max {max(growth):6.1f}x")
    worst = max(rows, key=lambda r: r[2])
    print(f"largest output: {worst[2]} nodes (from {worst[1]}, stratum {worst[0]})")


if __name__ == "__main__":
    main()
