"""Exhaustive bounded check of one manuscript's review lifecycle.

    python3 scripts/model_check.py --k 1 2 --reviewers 3 --versions 3
"""

import argparse
import sys

from porledger.modelcheck import check


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--k", type=int, nargs="+", default=[1, 2])
    p.add_argument("--reviewers", type=int, default=3)
    p.add_argument("--versions", type=int, default=3)
    args = p.parse_args()

    failed = False
    for k in args.k:
        r = check(k, n_reviewers=args.reviewers, max_versions=args.versions)
        terminal = ", ".join(f"{s}={n}" for s, n in sorted(r.terminal.items()))
        print(
            f"K={k} reviewers={r.reviewers} versions<={r.max_versions}: "
            f"{r.states} states, {r.transitions} transitions, {r.rejected} rejected, "
            f"terminal [{terminal}], {r.seconds:.2f} s, {'ok' if r.ok else 'VIOLATIONS'}"
        )
        for v in r.violations[:10]:
            print(f"  {v}")
        failed |= not r.ok
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
