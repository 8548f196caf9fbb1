"""Exhaustive exploration of one manuscript's Proof-of-Review lifecycle.

The concrete :class:`Ecosystem` is driven through every interleaving of
reviewer actions (stake, unstake, confirm, request revision), author
revisions and withdrawal. States are deduplicated on an abstraction that
keeps only what the protocol can observe going forward: the manuscript state
and version, and per reviewer whether a live staked contract exists and what
their latest verdict says about the current version.

Checked on every transition:

* the manuscript only moves Under-review -> {Under-review, Confirmed, Withdrawn};
  terminal states never change and reject every action
* every contract state change is a path through ``contracts.TRANSITIONS``
* every review record has a matching escrow (stake before voice)
* a revision leaves the tally at zero
* spendable + escrowed == supply, and rejected actions change nothing
"""

from __future__ import annotations

import copy
import time
from collections import deque
from dataclasses import dataclass, field

from porledger import errors
from porledger.contracts import TRANSITIONS, ContractKind, ContractState
from porledger.ecosystem import Ecosystem
from porledger.graph import ManuscriptState, Verdict
from porledger.identity import Profile
from porledger.policy import PolicyConfig

MS = ManuscriptState
ALLOWED_MOVES = {
    (MS.UNDER_REVIEW, MS.UNDER_REVIEW),
    (MS.UNDER_REVIEW, MS.CONFIRMED),
    (MS.UNDER_REVIEW, MS.WITHDRAWN),
    (MS.CONFIRMED, MS.CONFIRMED),
    (MS.WITHDRAWN, MS.WITHDRAWN),
}


@dataclass
class CheckResult:
    k: int
    reviewers: int
    max_versions: int
    states: int = 0
    transitions: int = 0
    rejected: int = 0
    terminal: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass
class World:
    eco: Ecosystem
    origin: bytes
    reviewers: tuple[bytes, ...]


def _reachable(a: ContractState, b: ContractState) -> bool:
    frontier, seen = [a], {a}
    while frontier:
        s = frontier.pop()
        if s == b:
            return True
        for (src, _), dst in TRANSITIONS.items():
            if src == s and dst not in seen:
                seen.add(dst)
                frontier.append(dst)
    return False


def build_world(k: int, n_reviewers: int, seed: int = 0) -> World:
    eco = Ecosystem(PolicyConfig(K=k), seed)
    author = eco.create_user(Profile("author", frozenset({"ledgers"})), name="author").address
    reviewers = tuple(
        eco.create_user(Profile(f"r{i}", frozenset({"ledgers"}), reviewer_opt_in=True), name=f"r{i}").address
        for i in range(n_reviewers)
    )
    contract = eco.propose_contract(ContractKind.AUTHORSHIP, [author])
    eco.sign_contract(contract.id, author)
    node = eco.submit(contract.id, "v1", [eco.genesis.id], ["ledgers"])
    return World(eco, node.origin, reviewers)


def _live_review(eco: Ecosystem, origin: bytes, reviewer: bytes):
    for c in eco.contracts_for(origin):
        if c.kind is ContractKind.REVIEW and c.parties[0] == reviewer and c.state is ContractState.ACTIVE:
            return c
    return None


def abstract(world: World) -> tuple:
    eco, node = world.eco, world.eco.graph.node(world.origin)
    latest = {rec.reviewer: rec for rec in node.confirmations}
    per = []
    for r in world.reviewers:
        rec = latest.get(r)
        if rec is None:
            tag = "none"
        elif rec.version_signed != node.version:
            tag = "stale"
        else:
            tag = rec.verdict.value
        per.append((_live_review(eco, world.origin, r) is not None, tag))
    return node.state.value, node.version, tuple(per)


def actions(world: World) -> list[tuple]:
    out: list[tuple] = []
    for i in range(len(world.reviewers)):
        out += [("stake", i), ("unstake", i), ("review", i, Verdict.CONFIRM), ("review", i, Verdict.REVISE)]
    out.append(("revise",))
    out.append(("withdraw",))
    return out


def apply(world: World, action: tuple, max_versions: int) -> None:
    eco, origin = world.eco, world.origin
    kind = action[0]
    if kind == "stake":
        r = world.reviewers[action[1]]
        c = eco.propose_contract(ContractKind.REVIEW, [r], target=origin)
        eco.sign_contract(c.id, r)
    elif kind == "unstake":
        c = _live_review(eco, origin, world.reviewers[action[1]])
        if c is None:
            raise errors.UnknownContract("no live review contract")
        eco.cancel_contract(c.id)
    elif kind == "review":
        eco.review(origin, world.reviewers[action[1]], action[2], "")
        eco.try_confirm(origin)
    elif kind == "revise":
        node = eco.graph.node(origin)
        if node.version >= max_versions:
            raise errors.StateMismatch("version bound reached")
        eco.revise(origin, f"v{node.version + 1}")
    elif kind == "withdraw":
        eco.withdraw(origin)
    else:
        raise ValueError(kind)


def _check(before: World, after: World, action: tuple, result: CheckResult) -> None:
    v = result.violations
    n0, n1 = before.eco.graph.node(before.origin), after.eco.graph.node(after.origin)
    if (n0.state, n1.state) not in ALLOWED_MOVES:
        v.append(f"{action}: manuscript moved {n0.state.value} -> {n1.state.value}")
    if n0.state is not MS.UNDER_REVIEW and after.eco.state_digest() != before.eco.state_digest():
        v.append(f"{action}: terminal manuscript changed")
    for cid, c1 in after.eco.contracts.items():
        c0 = before.eco.contracts.get(cid)
        if c0 is not None and c0.state != c1.state and not _reachable(c0.state, c1.state):
            v.append(f"{action}: contract moved {c0.state.value} -> {c1.state.value}")
    v += [f"{action}: {msg}" for msg in after.eco.stake_before_voice_violations()]
    if action[0] == "revise" and after.eco.tally(after.origin) != 0:
        v.append(f"{action}: revision left tally at {after.eco.tally(after.origin)}")
    if after.eco.conservation_gap() != 0:
        v.append(f"{action}: conservation broken by {after.eco.conservation_gap()}")


def check(k: int, n_reviewers: int = 3, max_versions: int = 3, seed: int = 0) -> CheckResult:
    """Breadth-first search over every interleaving up to the bounds."""
    t0 = time.perf_counter()
    result = CheckResult(k, n_reviewers, max_versions)
    root = build_world(k, n_reviewers, seed)
    seen = {abstract(root)}
    queue = deque([root])
    while queue:
        world = queue.popleft()
        result.states += 1
        state = world.eco.graph.node(world.origin).state
        if state is not MS.UNDER_REVIEW:
            result.terminal[state.value] = result.terminal.get(state.value, 0) + 1
        digest_before = world.eco.state_digest()
        for action in actions(world):
            nxt = copy.deepcopy(world)
            try:
                apply(nxt, action, max_versions)
            except errors.ProtocolError:
                result.rejected += 1
                if nxt.eco.state_digest() != digest_before:
                    result.violations.append(f"{action}: rejected action left partial state")
                continue
            result.transitions += 1
            _check(world, nxt, action, result)
            key = abstract(nxt)
            if key not in seen:
                seen.add(key)
                queue.append(nxt)
    result.seconds = time.perf_counter() - t0
    return result
