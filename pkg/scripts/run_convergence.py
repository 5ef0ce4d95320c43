"""Print AUC-vs-checkpoint curves for one or more shipped configs.

    python scripts/run_convergence.py ref-separated ref-null --seeds 5
"""

import argparse
import math

from preattack.config import REFERENCE_CONFIGS, load_experiment
from preattack.eval_harness import VARIANTS, run_experiment


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("configs", nargs="*", default=list(REFERENCE_CONFIGS))
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args()
    for name in args.configs:
        cfg = load_experiment(name)
        curves, _ = run_experiment(cfg, VARIANTS, args.seeds, threads=args.threads)
        xs = [x for x, _, _ in curves[0].points]
        print(f"\n{cfg.name}  ({args.seeds} seeds)")
        print(f"{'variant':<20}" + "".join(f"{x:>7}" for x in xs))
        for c in curves:
            cells = "".join(f"{'-':>7}" if math.isnan(a) else f"{a:7.3f}" for _, a, _ in c.points)
            print(f"{c.variant:<20}{cells}")


if __name__ == "__main__":
    main()
