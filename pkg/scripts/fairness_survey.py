#!/usr/bin/env python3
"""Survey fairness solutions over random packet-exchange instances.

For each seeded random instance: solve, take the Shapley value and the
grid egalitarian solution, and compare how finely each would require the
packets to be split.  The grid solution is guaranteed to fit the
(|partition|-1)-chunk grid; the Shapley value often is not, which is the
practical argument for the egalitarian route.

Usage: python scripts/fairness_survey.py [count] [--seed-base N]
"""

import argparse
import random
from fractions import Fraction as F

from omnifair import (
    LinearSource,
    min_sum_rate,
    packet_split_plan,
    sda,
    shapley_exact,
)


def random_instance(seed: int) -> LinearSource:
    rng = random.Random(seed)
    n = rng.randint(3, 6)
    m = rng.randint(n, 12)
    packets = [f"p{k}" for k in range(m)]
    holdings = {u: rng.sample(packets, rng.randint(1, m)) for u in range(1, n + 1)}
    return LinearSource.from_packets(holdings, universe=packets)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("count", nargs="?", type=int, default=25)
    parser.add_argument("--seed-base", type=int, default=1000)
    args = parser.parse_args()

    header = f"{'seed':>6} {'|V|':>4} {'R':>8} {'K*':>4} {'chunks(Shapley)':>16} {'chunks(egal)':>13}"
    print(header)
    print("-" * len(header))
    coarser = 0
    for k in range(args.count):
        seed = args.seed_base + k
        ctx = min_sum_rate(random_instance(seed))
        shapley_chunks = packet_split_plan(shapley_exact(ctx)).chunks_per_packet
        egal, _ = sda(ctx)
        egal_chunks = packet_split_plan(egal).chunks_per_packet
        assert ctx.grid_denominator % egal_chunks == 0
        if egal_chunks <= shapley_chunks:
            coarser += 1
        print(f"{seed:>6} {len(ctx.users):>4} {str(ctx.min_sum_rate):>8} "
              f"{ctx.grid_denominator:>4} {shapley_chunks:>16} {egal_chunks:>13}")
    print(f"\negalitarian splitting at least as coarse on {coarser}/{args.count} instances")


if __name__ == "__main__":
    main()
