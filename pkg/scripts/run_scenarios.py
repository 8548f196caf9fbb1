"""Run every bundled scenario (or the named ones) and write their outputs.

    python3 scripts/run_scenarios.py --out runs/
    python3 scripts/run_scenarios.py ten-users --redirect
"""

import argparse
from pathlib import Path

from porledger.canonical import hexs
from porledger.policy import PolicyConfig, SelfCitationRule
from porledger.scenario import bundled_scenarios, load_script, run_scenario


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("names", nargs="*", help="bundled scenario names or .scn paths (default: all bundled)")
    p.add_argument("--out", default="runs", help="one subdirectory per scenario is written here")
    p.add_argument("--seed", type=int)
    p.add_argument("--redirect", action="store_true", help="redirect self-citation author income to the treasury")
    args = p.parse_args()

    policy = PolicyConfig(self_citation_rule=SelfCitationRule.REDIRECT_AUTHORS_TO_TREASURY) if args.redirect else None
    for name in args.names or sorted(bundled_scenarios()):
        out = Path(args.out) / Path(name).stem
        report = run_scenario(load_script(name), out, seed=args.seed, policy=policy)
        eco = report.ecosystem
        states = " ".join(f"{m}={s}" for m, s in report.node_states.items() if m != "genesis")
        print(f"{name}: steps={report.steps_run} settlements={len(eco.reports)} {states}")
        print(f"  ledger {hexs(report.ledger_digest)}")
        print(f"  wrote {out}/")


if __name__ == "__main__":
    main()
