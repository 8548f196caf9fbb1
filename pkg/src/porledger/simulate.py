"""Seeded random walks over the full command set.

Each step picks one command with random (often invalid) arguments and
applies it. Rejections must leave no trace; every step must conserve supply.
Used by the conservation acceptance check and ``scripts/random_walk.py``.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from porledger import errors
from porledger.contracts import ContractKind, ContractState, ContractTerms
from porledger.ecosystem import Ecosystem
from porledger.graph import ManuscriptState, Verdict
from porledger.identity import Profile
from porledger.policy import PolicyConfig

KEYWORDS = ("ledgers", "graphs", "crypto", "consensus", "review")
COMMANDS = (
    "create-user",
    "propose-authorship",
    "sign-contract",
    "submit",
    "propose-review",
    "review",
    "revise",
    "withdraw",
    "propose-remark",
    "attach-remark",
    "cancel-contract",
    "select-reviewers",
    "advance-tick",
)
WEIGHTS = (3, 3, 8, 3, 6, 10, 1, 0.3, 2, 2, 0.5, 1, 1)
SMART = 0.85  # chance an argument is drawn from the plausible candidates


@dataclass
class WalkResult:
    steps: int = 0
    applied: Counter = field(default_factory=Counter)
    rejected: Counter = field(default_factory=Counter)
    violations: list = field(default_factory=list)


def fingerprint(eco: Ecosystem) -> tuple:
    """Cheap commitment to the whole state: the ledger frontier commits to
    every transaction, node ids commit to node contents."""
    return (
        eco.ledger.frontier,
        len(eco.ledger.transactions),
        tuple(sorted((n.origin, n.id) for n in eco.graph.nodes.values())),
        tuple(sorted((c.id, c.state, c.signed_by, c.shares) for c in eco.contracts.values())),
        tuple(sorted((a, u.profile, u.reviews_completed) for a, u in eco.users.accounts.items())),
        eco.clock.tick,
        eco.stream.counter,
        len(eco.reports),
    )


class Walker:
    def __init__(self, eco: Ecosystem, rng: random.Random, max_users: int = 12):
        self.eco = eco
        self.rng = rng
        self.max_users = max_users

    def _users(self) -> list[bytes]:
        return sorted(self.eco.users.accounts)

    def _under_review(self) -> list[bytes]:
        return sorted(o for o, n in self.eco.graph.nodes.items() if n.state is ManuscriptState.UNDER_REVIEW)

    def _pick(self, seq):
        if not seq:
            raise errors.StateMismatch("nothing to pick from")
        return self.rng.choice(list(seq))

    def step(self, command: str) -> None:
        eco, rng = self.eco, self.rng
        if command == "create-user":
            if len(eco.users.accounts) >= self.max_users:
                raise errors.InvalidProfile("user cap reached")
            kws = frozenset(rng.sample(KEYWORDS, rng.randint(0, 3)))
            profile = Profile(f"u{len(eco.users.accounts)}", kws, reviewer_opt_in=rng.random() < 0.7)
            eco.create_user(profile)
        elif command == "propose-authorship":
            authors = rng.sample(self._users(), min(len(self._users()), rng.randint(1, 3)))
            weights = [rng.randint(1, 4) for _ in authors]
            shares = [(a, Fraction(w, sum(weights))) for a, w in zip(authors, weights)]
            stake = rng.choice((None, rng.randint(1, 60)))
            eco.propose_contract(ContractKind.AUTHORSHIP, authors, shares, stake)
        elif command == "sign-contract":
            pending = [c for c in eco.contracts.values() if c.state in (ContractState.PROPOSED, ContractState.SIGNED)]
            c = self._pick(sorted(pending, key=lambda c: c.id))
            eco.sign_contract(c.id, self._pick([p for p in c.parties if p not in c.signed_by] or c.parties))
        elif command == "submit":
            ready = [
                c
                for c in eco.contracts.values()
                if c.kind is ContractKind.AUTHORSHIP and c.state is ContractState.ACTIVE and c.manuscript not in eco.graph.nodes
            ]
            c = self._pick(sorted(ready, key=lambda c: c.id))
            confirmed = sorted(n.id for n in eco.graph.nodes.values() if n.state is ManuscriptState.CONFIRMED)
            cites = rng.sample(confirmed, rng.randint(1, min(3, len(confirmed))))
            eco.submit(c.id, f"content {rng.random()}", cites, rng.sample(KEYWORDS, 2))
        elif command == "propose-review":
            origin = self._pick(self._under_review())
            node = eco.graph.node(origin)
            eligible = [
                a
                for a in self._users()
                if a not in node.authorship.addresses and eco.users.accounts[a].profile.reviewer_opt_in
            ]
            reviewer = self._pick(eligible if eligible and rng.random() < SMART else self._users())
            eco.propose_contract(ContractKind.REVIEW, [reviewer], target=origin)
        elif command == "review":
            origin = self._pick(self._under_review())
            staked = [
                c.parties[0]
                for c in eco.contracts_for(origin)
                if c.kind is ContractKind.REVIEW and c.state is ContractState.ACTIVE
            ]
            reviewer = self._pick(staked if staked and rng.random() < SMART else self._users())
            verdict = Verdict.CONFIRM if rng.random() < 0.8 else Verdict.REVISE
            eco.review(origin, reviewer, verdict, "report")
            eco.try_confirm(origin)
        elif command == "revise":
            eco.revise(self._pick(self._under_review()), f"revised {rng.random()}")
        elif command == "withdraw":
            eco.withdraw(self._pick(self._under_review()))
        elif command == "propose-remark":
            authorships = sorted(
                (c for c in eco.contracts.values() if c.kind is ContractKind.AUTHORSHIP), key=lambda c: c.id
            )
            target = self._pick(authorships)
            kind = rng.choice((ContractKind.FUNDING, ContractKind.INDEXING))
            terms = ContractTerms(
                covered_fraction=Fraction(rng.randint(0, 2), 4) if kind is ContractKind.FUNDING else Fraction(0),
                clawback_share=Fraction(rng.randint(0, 2), 10),
                k_override=rng.choice((None, 1, 2, 3)) if kind is ContractKind.INDEXING else None,
            )
            eco.propose_contract(kind, [self._pick(self._users())], None, rng.randint(1, 20), terms, target=target.id)
        elif command == "attach-remark":
            active = sorted(
                (
                    c
                    for c in eco.contracts.values()
                    if c.kind in (ContractKind.FUNDING, ContractKind.INDEXING) and c.state is ContractState.ACTIVE
                ),
                key=lambda c: c.id,
            )
            submitted = [c for c in active if c.manuscript in eco.graph.nodes]
            c = self._pick(submitted if submitted and rng.random() < SMART else active)
            eco.attach_remark(c.manuscript, c.id)
        elif command == "cancel-contract":
            c = self._pick(sorted(eco.contracts.values(), key=lambda c: c.id))
            eco.cancel_contract(c.id)
        elif command == "select-reviewers":
            eco.invite(self._pick(self._under_review()))
        elif command == "advance-tick":
            eco.advance_tick(rng.randint(1, 3))
        else:
            raise ValueError(command)


def random_walk(
    seed: int,
    steps: int,
    policy: PolicyConfig | None = None,
    *,
    on_step: Callable[[int, Ecosystem], None] | None = None,
    check_atomic: bool = True,
) -> tuple[Ecosystem, WalkResult]:
    rng = random.Random(seed)
    eco = Ecosystem(policy or PolicyConfig(author_stake=30, reviewer_stake=5), seed)
    walker = Walker(eco, rng)
    result = WalkResult()
    for i in range(steps):
        command = rng.choices(COMMANDS, WEIGHTS)[0]
        before = fingerprint(eco) if check_atomic else None
        try:
            walker.step(command)
        except errors.ProtocolError as exc:
            result.rejected[f"{command}:{exc.category}"] += 1
            if check_atomic and fingerprint(eco) != before:
                result.violations.append(f"step {i}: rejected {command} ({exc.category}) changed state")
        else:
            result.applied[command] += 1
        result.steps += 1
        gap = eco.conservation_gap()
        if gap:
            result.violations.append(f"step {i}: {command} broke conservation by {gap}")
        if on_step is not None:
            on_step(i, eco)
    return eco, result
