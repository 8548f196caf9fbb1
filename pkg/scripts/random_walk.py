"""Random command walks over a fresh ecosystem, checking conservation and
atomic rejection after every step.

    python3 scripts/random_walk.py --seeds 0 1 2 --steps 5000
"""

import argparse
import sys
import time

from porledger.simulate import random_walk


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("-v", "--verbose", action="store_true", help="print command counts")
    args = p.parse_args()

    bad = 0
    for seed in args.seeds:
        t0 = time.perf_counter()
        eco, result = random_walk(seed, args.steps)
        confirmed = sum(n.state.value == "confirmed" for n in eco.graph.nodes.values()) - 1
        verified = eco.verify().ok
        print(
            f"seed={seed}: {result.steps} steps, {sum(result.applied.values())} applied, "
            f"{sum(result.rejected.values())} rejected, {confirmed} confirmed, "
            f"{len(result.violations)} violations, verify={'ok' if verified else 'FAIL'}, "
            f"{time.perf_counter() - t0:.2f} s"
        )
        if args.verbose:
            for cmd, n in sorted(result.applied.items()):
                print(f"  applied  {cmd:<18} {n}")
            for cmd, n in sorted(result.rejected.items()):
                print(f"  rejected {cmd:<18} {n}")
        for v in result.violations[:10]:
            print(f"  {v}")
        bad += bool(result.violations) or not verified
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
