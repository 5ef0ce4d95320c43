"""Time single-threaded classification of synthetic streams of growing size.

    python scripts/throughput.py --sizes 100000 1000000 10000000
"""

import argparse
import time

import numpy as np

from preattack import EdgeStream, build_preattack_table
from preattack.classifier import score
from preattack.kcdpa_sim import NetworkRecipe, reference_network


def synthetic_stream(net, n, events_per_user=40, seed=0):
    rng = np.random.default_rng(seed)
    m = max(n // events_per_user, 1)
    lo = 10**9
    return EdgeStream(np.arange(1, n + 1), rng.integers(0, 2, n), lo + rng.integers(0, m, n),
                      net.ids[rng.integers(0, net.user_count, n)], (lo, lo + m - 1))


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[10**5, 10**6, 10**7])
    p.add_argument("--network-users", type=int, default=10_000)
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args()
    net, _, _ = reference_network(NetworkRecipe("separated", args.network_users, 0.1, 10 * args.network_users, seed=11))
    print(f"{'events':>10} {'seconds':>9} {'ns/event':>9}")
    for n in args.sizes:
        s = synthetic_stream(net, n)
        t0 = time.perf_counter()
        score(build_preattack_table(net, 1.0, s), s, 0.1, threads=args.threads)
        dt = time.perf_counter() - t0
        print(f"{n:>10} {dt:9.3f} {dt / n * 1e9:9.0f}")


if __name__ == "__main__":
    main()
