"""Proof-of-Review: reviewer selection, confirmation tally and the settlement
arithmetic that routes a confirmed manuscript's pooled stakes to the
manuscripts it cites.

Everything here is a pure function of its arguments. The stateful steps
(locking, executing payouts) live in :mod:`porledger.ecosystem`.

All amounts are integer grains. Shares are exact fractions; every payout line
is ``floor(amount * class_weight * member_weight)`` and whatever the floors
leave behind goes to the treasury, so outputs always sum to the input.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from porledger import errors
from porledger.canonical import digest, hexs
from porledger.graph import GENESIS_ORIGIN, ManuscriptNode, ManuscriptState, Verdict
from porledger.identity import UserAccount
from porledger.policy import PolicyConfig, SelfCitationRule

HISTORY_CAP = 10


class BeneficiaryClass(str, enum.Enum):
    AUTHOR = "author"
    REVIEWER = "reviewer"
    REMARK = "remark"
    TREASURY = "treasury"


class StakeRole(str, enum.Enum):
    AUTHOR = "author-stake"
    REVIEW = "review-stake"
    REMARK = "remark-stake"


@dataclass(frozen=True)
class StakeHolding:
    """A held escrow that belongs to a manuscript's pool."""

    escrow_id: bytes
    owner: bytes
    amount: int
    role: StakeRole


# ---------------------------------------------------------------------------
# Reviewer selection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReviewerScore:
    candidate: bytes
    keyword_overlap: int
    history: int
    score: int
    tie_break: int


def tie_break_value(seed: bytes | int, candidate: bytes) -> int:
    return int.from_bytes(digest({"select-seed": seed, "candidate": candidate})[:8], "big")


def score_candidates(
    manuscript: ManuscriptNode,
    pool: Iterable[UserAccount],
    seed: bytes | int,
    *,
    contracted: Iterable[bytes] = (),
    whitelist: Iterable[bytes] | None = None,
) -> list[ReviewerScore]:
    """Score every eligible candidate, best first."""
    excluded = set(manuscript.authorship.addresses) | set(contracted)
    allowed = set(whitelist) if whitelist is not None else None
    scores = []
    for account in pool:
        addr = account.address
        if not account.profile.reviewer_opt_in or addr in excluded:
            continue
        if allowed is not None and addr not in allowed:
            continue
        overlap = len(account.profile.keywords & manuscript.meta.keywords)
        history = min(account.reviews_completed, HISTORY_CAP)
        scores.append(ReviewerScore(addr, overlap, account.reviews_completed, 2 * overlap + history, tie_break_value(seed, addr)))
    scores.sort(key=lambda s: (-s.score, s.tie_break, s.candidate))
    return scores


def select_reviewers(
    manuscript: ManuscriptNode,
    pool: Iterable[UserAccount],
    policy: PolicyConfig,
    seed: bytes | int,
    *,
    contracted: Iterable[bytes] = (),
    whitelist: Iterable[bytes] | None = None,
) -> list[bytes]:
    if manuscript.state is not ManuscriptState.UNDER_REVIEW:
        raise errors.NotUnderReview(f"manuscript is {manuscript.state.value}")
    ranked = score_candidates(manuscript, pool, seed, contracted=contracted, whitelist=whitelist)
    if not ranked:
        raise errors.EmptyPool("no eligible reviewers")
    return [s.candidate for s in ranked[: policy.candidate_count]]


# ---------------------------------------------------------------------------
# Tally
# ---------------------------------------------------------------------------


def confirming_reviewers(manuscript: ManuscriptNode) -> list[bytes]:
    """Distinct reviewers whose latest record confirms the current version."""
    latest = {}
    for rec in manuscript.confirmations:
        latest[rec.reviewer] = rec
    return sorted(
        r
        for r, rec in latest.items()
        if rec.verdict is Verdict.CONFIRM and rec.version_signed == manuscript.version
    )


def tally_confirmations(manuscript: ManuscriptNode) -> int:
    return len(confirming_reviewers(manuscript))


# ---------------------------------------------------------------------------
# Settlement arithmetic
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SettlementLine:
    address: bytes
    amount: int
    cls: BeneficiaryClass
    cited: bytes | None = None  # None for pool-level remainders and refunds

    def sort_key(self):
        return (self.address, self.cls.value, self.cited or b"", self.amount)


@dataclass(frozen=True)
class SettlementReport:
    manuscript: bytes
    event: str
    pool: int
    per_citation: tuple[tuple[bytes, int], ...]
    lines: tuple[SettlementLine, ...] = field(default=())

    def __deepcopy__(self, memo):
        return self  # immutable value

    def __post_init__(self):
        if any(line.amount < 0 for line in self.lines):
            raise ValueError("negative settlement line")
        if sum(line.amount for line in self.lines) != self.pool:
            raise ValueError("settlement lines do not sum to the pool")

    def sorted_lines(self) -> list[SettlementLine]:
        return sorted(self.lines, key=SettlementLine.sort_key)

    def total_for(self, cls: BeneficiaryClass) -> int:
        return sum(line.amount for line in self.lines if line.cls is cls)

    def audit_lines(self, seq: int) -> list[str]:
        return [
            f"{seq} {self.event} {hexs(self.manuscript)} {hexs(line.address)} {line.cls.value} "
            f"{line.amount} {hexs(line.cited) if line.cited else '-'}"
            for line in self.sorted_lines()
        ]


def _floor(x: Fraction) -> int:
    return math.floor(x)


def split_across_citations(pool: int, citations: Sequence[bytes]) -> tuple[list[tuple[bytes, int]], int]:
    """Equal split over distinct citations; returns (per-citation, remainder)."""
    cited = sorted(set(citations))
    if not cited:
        raise errors.NoCitations("cannot settle a manuscript without citations")
    each = pool // len(cited)
    return [(c, each) for c in cited], pool - each * len(cited)


def distribution_for_citation(
    cited: ManuscriptNode,
    amount: int,
    citing: ManuscriptNode | None,
    policy: PolicyConfig,
    *,
    treasury: bytes,
    clawbacks: Sequence[tuple[bytes, Fraction]] = (),
) -> list[tuple[bytes, int, BeneficiaryClass]]:
    """Split ``amount`` arriving at ``cited`` among its stakeholders.

    ``clawbacks`` are (beneficiary, fraction) pairs from funding or indexing
    contracts on the cited manuscript; each redirects that fraction of the
    author class away from the authors.
    """
    if cited.state is not ManuscriptState.CONFIRMED:
        raise errors.NotConfirmed("only confirmed manuscripts receive citation income")
    if amount < 0:
        raise ValueError("amount must be non-negative")
    claw_total = sum((Fraction(c) for _, c in clawbacks), Fraction(0))
    if claw_total > 1 or any(Fraction(c) < 0 for _, c in clawbacks):
        raise errors.InvalidShares("clawback shares must be non-negative and total at most 1")

    authors = [] if cited.origin == GENESIS_ORIGIN else list(cited.authorship.authors)
    reviewers = confirming_reviewers(cited)
    remark_stake: dict[bytes, int] = {}
    for rem in cited.remarks:
        remark_stake[rem.agent] = remark_stake.get(rem.agent, 0) + rem.stake

    weights = {
        BeneficiaryClass.AUTHOR: policy.alpha if authors else Fraction(0),
        BeneficiaryClass.REVIEWER: policy.beta if reviewers else Fraction(0),
        BeneficiaryClass.REMARK: policy.gamma if remark_stake else Fraction(0),
    }
    total_w = sum(weights.values())
    lines: list[tuple[bytes, int, BeneficiaryClass]] = []
    if total_w > 0 and amount > 0:
        w = {k: v / total_w for k, v in weights.items()}
        author_lines = []
        for beneficiary, share in clawbacks:
            author_lines.append((beneficiary, _floor(amount * w[BeneficiaryClass.AUTHOR] * Fraction(share))))
        for addr, share in authors:
            author_lines.append((addr, _floor(amount * w[BeneficiaryClass.AUTHOR] * (1 - claw_total) * share)))
        redirect = (
            policy.self_citation_rule is SelfCitationRule.REDIRECT_AUTHORS_TO_TREASURY
            and citing is not None
            and set(citing.authorship.addresses) & {a for a, _ in authors}
        )
        for addr, amt in author_lines:
            lines.append((treasury if redirect else addr, amt, BeneficiaryClass.AUTHOR))
        if reviewers:
            each = amount * w[BeneficiaryClass.REVIEWER] / len(reviewers)
            lines += [(r, _floor(each), BeneficiaryClass.REVIEWER) for r in reviewers]
        if remark_stake:
            pool_stake = sum(remark_stake.values())
            for agent in sorted(remark_stake):
                amt = _floor(amount * w[BeneficiaryClass.REMARK] * Fraction(remark_stake[agent], pool_stake))
                lines.append((agent, amt, BeneficiaryClass.REMARK))
    lines = [line for line in lines if line[1] > 0]
    remainder = amount - sum(amt for _, amt, _ in lines)
    if remainder:
        lines.append((treasury, remainder, BeneficiaryClass.TREASURY))
    return lines


def plan_confirmation_settlement(
    citing: ManuscriptNode,
    pool: int,
    cited_nodes: Sequence[ManuscriptNode],
    policy: PolicyConfig,
    *,
    treasury: bytes,
    clawbacks_for=lambda origin: (),
) -> SettlementReport:
    """Route ``pool`` through every citation of ``citing``.

    ``cited_nodes`` must be the nodes ``citing.citations`` points at;
    ``clawbacks_for(origin)`` supplies each cited node's clawback table.
    """
    by_id = {n.id: n for n in cited_nodes}
    per_citation, remainder = split_across_citations(pool, citing.citations)
    lines: list[SettlementLine] = []
    for cid, inflow in per_citation:
        target = by_id.get(cid)
        if target is None:
            raise errors.UnknownManuscript(f"cited node {hexs(cid)[:12]} not supplied")
        for addr, amt, cls in distribution_for_citation(
            target, inflow, citing, policy, treasury=treasury, clawbacks=clawbacks_for(target.origin)
        ):
            lines.append(SettlementLine(addr, amt, cls, cid))
    if remainder:
        lines.append(SettlementLine(treasury, remainder, BeneficiaryClass.TREASURY))
    return SettlementReport(citing.id, "confirm", pool, tuple(per_citation), tuple(lines))


def plan_withdrawal(
    manuscript: ManuscriptNode,
    holdings: Sequence[StakeHolding],
    policy: PolicyConfig,
    *,
    treasury: bytes,
) -> tuple[SettlementReport, dict[bytes, list[tuple[bytes, int]]]]:
    """Refund plan: each author-stake escrow returns ``floor(rho * amount)`` to
    its owner with the rest to the treasury; review and remark stakes come
    back in full. Returns the report and per-escrow payouts."""
    payouts: dict[bytes, list[tuple[bytes, int]]] = {}
    lines: list[SettlementLine] = []
    role_cls = {
        StakeRole.AUTHOR: BeneficiaryClass.AUTHOR,
        StakeRole.REVIEW: BeneficiaryClass.REVIEWER,
        StakeRole.REMARK: BeneficiaryClass.REMARK,
    }
    for h in holdings:
        back = _floor(policy.rho_refund * h.amount) if h.role is StakeRole.AUTHOR else h.amount
        payout = [(h.owner, back), (treasury, h.amount - back)]
        payouts[h.escrow_id] = [p for p in payout if p[1] > 0]
        if back:
            lines.append(SettlementLine(h.owner, back, role_cls[h.role]))
        if h.amount - back:
            lines.append(SettlementLine(treasury, h.amount - back, BeneficiaryClass.TREASURY))
    pool = sum(h.amount for h in holdings)
    return SettlementReport(manuscript.id, "withdraw", pool, (), tuple(lines)), payouts
