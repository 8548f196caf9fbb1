"""Smart-contract layer: four parameterized templates, their signing
lifecycle, and the pure trigger function that turns protocol events into
ledger instructions.

Lifecycle::

    Proposed -> Signed -> Active -> Locked -> Settled
        |          |         |
        +----------+---------+--> Cancelled

An Active contract can only be cancelled while nothing depends on it yet
(no review recorded, no manuscript submitted); the ecosystem checks that.

Contracts are immutable values; every transition returns a new one.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Mapping, Sequence, Union

from porledger import errors
from porledger.canonical import digest, encode, hexs
from porledger.consensus import (
    SettlementReport,
    StakeHolding,
    distribution_for_citation,
    plan_confirmation_settlement,
    plan_withdrawal,
)
from porledger.crypto import verify_signature
from porledger.graph import ManuscriptState, PublicationGraph, origin_for
from porledger.policy import PolicyConfig


class ContractKind(str, enum.Enum):
    AUTHORSHIP = "authorship"
    REVIEW = "review"
    FUNDING = "funding"
    INDEXING = "indexing"


class ContractState(str, enum.Enum):
    PROPOSED = "proposed"
    SIGNED = "signed"
    ACTIVE = "active"
    LOCKED = "locked"
    SETTLED = "settled"
    CANCELLED = "cancelled"


class Action(str, enum.Enum):
    SIGN = "sign"
    ACTIVATE = "activate"
    LOCK = "lock"
    SETTLE = "settle"
    CANCEL = "cancel"
    EDIT_SHARES = "edit-shares"


S = ContractState
TRANSITIONS: dict[tuple[ContractState, Action], ContractState] = {
    (S.PROPOSED, Action.SIGN): S.SIGNED,
    (S.SIGNED, Action.SIGN): S.SIGNED,
    (S.SIGNED, Action.ACTIVATE): S.ACTIVE,
    (S.ACTIVE, Action.LOCK): S.LOCKED,
    (S.LOCKED, Action.SETTLE): S.SETTLED,
    (S.PROPOSED, Action.CANCEL): S.CANCELLED,
    (S.SIGNED, Action.CANCEL): S.CANCELLED,
    (S.ACTIVE, Action.CANCEL): S.CANCELLED,
    (S.PROPOSED, Action.EDIT_SHARES): S.PROPOSED,
    (S.SIGNED, Action.EDIT_SHARES): S.SIGNED,
    (S.ACTIVE, Action.EDIT_SHARES): S.ACTIVE,
}


def transition(state: ContractState, action: Action) -> ContractState:
    try:
        return TRANSITIONS[(state, action)]
    except KeyError:
        if state in (S.LOCKED, S.SETTLED):
            raise errors.AlreadyLocked(f"contract is {state.value}; cannot {action.value}") from None
        if state is S.ACTIVE and action is Action.SIGN:
            raise errors.AlreadyActive("contract is already active") from None
        raise errors.StateMismatch(f"cannot {action.value} a {state.value} contract") from None


@dataclass(frozen=True)
class ContractTerms:
    """Kind-specific terms. Funding uses covered_fraction + clawback_share;
    indexing uses venue, k_override, whitelist and clawback_share."""

    covered_fraction: Fraction = Fraction(0)
    clawback_share: Fraction = Fraction(0)
    venue: str = ""
    k_override: int | None = None
    whitelist: tuple[bytes, ...] | None = None

    def record(self) -> dict:
        return {
            "covered_fraction": self.covered_fraction,
            "clawback_share": self.clawback_share,
            "venue": self.venue,
            "k_override": self.k_override,
            "whitelist": None if self.whitelist is None else sorted(self.whitelist),
        }


@dataclass(frozen=True)
class Contract:
    id: bytes
    kind: ContractKind
    parties: tuple[bytes, ...]
    shares: tuple[tuple[bytes, Fraction], ...]
    stake_required: int
    manuscript: bytes | None
    terms: ContractTerms = field(default_factory=ContractTerms)
    state: ContractState = ContractState.PROPOSED
    signatures: tuple[tuple[bytes, bytes], ...] = ()
    nonce: int = 0

    def __deepcopy__(self, memo):
        return self  # immutable value

    def signing_message(self) -> bytes:
        return encode(
            {
                "sign-contract": self.id,
                "shares": [[a, s] for a, s in self.shares],
                "stake_required": self.stake_required,
            }
        )

    def cancel_message(self) -> bytes:
        return encode({"cancel-contract": self.id})

    @property
    def signed_by(self) -> frozenset[bytes]:
        return frozenset(a for a, _ in self.signatures)

    def all_signed(self) -> bool:
        return self.signed_by >= set(self.parties)

    @property
    def live(self) -> bool:
        return self.state in (ContractState.ACTIVE, ContractState.LOCKED)


def _validate_shares(parties: Sequence[bytes], shares: Sequence[tuple[bytes, Fraction]]) -> None:
    if [a for a, _ in shares] != list(parties):
        raise errors.InvalidShares("share table must list exactly the parties, in order")
    if any(s <= 0 for _, s in shares):
        raise errors.InvalidShares("share weights must be positive")
    if sum(s for _, s in shares) != 1:
        raise errors.InvalidShares("share weights must sum to exactly 1")


def propose_contract(
    kind: ContractKind,
    parties: Sequence[bytes],
    shares: Sequence[tuple[bytes, Fraction]] | None,
    stake_required: int,
    terms: ContractTerms | None = None,
    *,
    manuscript: bytes | None = None,
    nonce: int = 0,
    is_known: Callable[[bytes], bool] = lambda addr: True,
) -> Contract:
    kind = ContractKind(kind)
    terms = terms or ContractTerms()
    parties = tuple(parties)
    if not parties or len(set(parties)) != len(parties):
        raise errors.InvalidShares("parties must be a non-empty list of distinct addresses")
    for p in parties:
        if not is_known(p):
            raise errors.UnknownParty(hexs(p))
    if shares is None:
        shares = [(p, Fraction(1, len(parties))) for p in parties]
    shares = tuple((a, Fraction(s)) for a, s in shares)
    _validate_shares(parties, shares)
    if kind is not ContractKind.AUTHORSHIP and len(parties) != 1:
        raise errors.InvalidShares(f"{kind.value} contracts have exactly one party")
    if not isinstance(stake_required, int) or stake_required < 0:
        raise errors.InvalidShares("stake must be a non-negative integer")
    if kind in (ContractKind.AUTHORSHIP, ContractKind.REVIEW) and stake_required == 0:
        raise errors.ZeroStake(f"{kind.value} contracts require a positive stake")
    if kind is not ContractKind.AUTHORSHIP and manuscript is None:
        raise errors.StateMismatch(f"{kind.value} contracts must name a manuscript")
    if not (0 <= terms.covered_fraction <= 1 and 0 <= terms.clawback_share <= 1):
        raise errors.InvalidShares("covered_fraction and clawback_share must lie in [0, 1]")
    if terms.k_override is not None and terms.k_override < 1:
        raise errors.InvalidShares("K override must be at least 1")
    if kind is not ContractKind.FUNDING and terms.covered_fraction:
        raise errors.InvalidShares("only funding contracts cover author stakes")
    body = {
        "kind": kind.value,
        "parties": list(parties),
        "shares": [[a, s] for a, s in shares],
        "stake_required": stake_required,
        "terms": terms.record(),
        "manuscript": manuscript,
        "nonce": nonce,
    }
    contract_id = digest(body)
    if kind is ContractKind.AUTHORSHIP:
        manuscript = origin_for(contract_id)
    return Contract(contract_id, kind, parties, shares, stake_required, manuscript, terms, nonce=nonce)


def sign_contract(contract: Contract, party: bytes, sig: bytes, public_key: bytes) -> Contract:
    """Record a party's signature. Activation (which needs escrowed stakes)
    is a separate :func:`activate` step driven by the caller."""
    if party not in contract.parties:
        raise errors.NotAParty(hexs(party)[:12])
    new_state = transition(contract.state, Action.SIGN)
    if not verify_signature(public_key, contract.signing_message(), sig):
        raise errors.BadSignature("contract signature does not verify")
    sigs = dict(contract.signatures)
    sigs[party] = sig
    return replace(contract, state=new_state, signatures=tuple(sorted(sigs.items())))


def activate(contract: Contract) -> Contract:
    if not contract.all_signed():
        raise errors.MissingSignature("not every party has signed")
    return replace(contract, state=transition(contract.state, Action.ACTIVATE))


def lock(contract: Contract) -> Contract:
    return replace(contract, state=transition(contract.state, Action.LOCK))


def settle(contract: Contract) -> Contract:
    return replace(contract, state=transition(contract.state, Action.SETTLE))


def cancel_contract(
    contract: Contract, party_quorum: Mapping[bytes, bytes], keys: Mapping[bytes, bytes]
) -> Contract:
    """Cancel with signatures from ``party_quorum`` (party -> sig over
    ``cancel_message``). Proposed/Signed need any one party; Active needs all.
    Escrow refunds are the caller's job."""
    new_state = transition(contract.state, Action.CANCEL)
    if not party_quorum:
        raise errors.MissingSignature("cancellation needs at least one party signature")
    for party, sig in party_quorum.items():
        if party not in contract.parties:
            raise errors.NotAParty(hexs(party)[:12])
        if not verify_signature(keys[party], contract.cancel_message(), sig):
            raise errors.BadSignature("cancellation signature does not verify")
    if contract.state is ContractState.ACTIVE and set(party_quorum) != set(contract.parties):
        raise errors.MissingSignature("cancelling an active contract needs every party")
    return replace(contract, state=new_state)


def edit_shares(contract: Contract, shares: Sequence[tuple[bytes, Fraction]]) -> Contract:
    """Replace an authorship share table (e.g. on revision). Previous
    signatures are dropped; authors re-sign the manuscript version instead."""
    if contract.kind is not ContractKind.AUTHORSHIP:
        raise errors.InvalidShares("only authorship shares can be edited")
    new_state = transition(contract.state, Action.EDIT_SHARES)
    shares = tuple((a, Fraction(s)) for a, s in shares)
    parties = tuple(a for a, _ in shares)
    _validate_shares(parties, shares)
    return replace(contract, parties=parties, shares=shares, state=new_state)


# ---------------------------------------------------------------------------
# Ledger instructions and triggers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Transfer:
    sender: bytes
    recipient: bytes
    amount: int
    trigger: bytes


@dataclass(frozen=True)
class Lock:
    owner: bytes
    amount: int
    contract: bytes


@dataclass(frozen=True)
class Release:
    escrow_id: bytes
    payout: tuple[tuple[bytes, int], ...]
    refund: bool = False


LedgerInstruction = Union[Transfer, Lock, Release]


@dataclass(frozen=True)
class ManuscriptConfirmed:
    origin: bytes


@dataclass(frozen=True)
class CitationReceived:
    cited_id: bytes
    amount: int
    citing_id: bytes


@dataclass(frozen=True)
class Withdrawn:
    origin: bytes


TriggerEvent = Union[ManuscriptConfirmed, CitationReceived, Withdrawn]


@dataclass(frozen=True)
class TriggerContext:
    """Read-only inputs a trigger needs besides the contracts themselves."""

    graph: PublicationGraph
    policy: PolicyConfig
    treasury: bytes
    holdings: Sequence[StakeHolding] = ()
    all_contracts: Mapping[bytes, Contract] = field(default_factory=dict)
    payer: bytes | None = None


def clawbacks_for(origin: bytes, contracts: Mapping[bytes, Contract]) -> list[tuple[bytes, Fraction]]:
    """(beneficiary, share) redirections of a manuscript's author income."""
    out = []
    for c in sorted(contracts.values(), key=lambda c: c.id):
        if (
            c.manuscript == origin
            and c.kind in (ContractKind.FUNDING, ContractKind.INDEXING)
            and c.live
            and c.terms.clawback_share > 0
        ):
            out.append((c.parties[0], c.terms.clawback_share))
    return out


def waterfall(
    sources: Sequence[tuple[bytes, int]], sinks: Sequence[tuple[bytes, int]]
) -> dict[bytes, list[tuple[bytes, int]]]:
    """Match source escrows to sink amounts grain-for-grain, in order.

    Both sides must total the same. Each source's payout sums to its amount.
    """
    if sum(a for _, a in sources) != sum(a for _, a in sinks):
        raise errors.PayoutMismatch("sources and sinks differ in total")
    out: dict[bytes, list[tuple[bytes, int]]] = {sid: [] for sid, _ in sources}
    pending = [[addr, amt] for addr, amt in sinks if amt > 0]
    k = 0
    for sid, amount in sources:
        left = amount
        while left:
            take = min(left, pending[k][1])
            out[sid].append((pending[k][0], take))
            pending[k][1] -= take
            left -= take
            if pending[k][1] == 0:
                k += 1
    return out


def _aggregate(report: SettlementReport) -> list[tuple[bytes, int]]:
    totals: dict[bytes, int] = {}
    for line in report.lines:
        totals[line.address] = totals.get(line.address, 0) + line.amount
    return sorted(totals.items())


def _check_related(origin: bytes, contracts: Sequence[Contract], allowed: tuple[ContractState, ...]) -> None:
    for c in contracts:
        if c.manuscript != origin:
            raise errors.StateMismatch(f"contract {hexs(c.id)[:12]} belongs to another manuscript")
        if c.state not in allowed:
            raise errors.StateMismatch(f"contract {hexs(c.id)[:12]} is {c.state.value}")


def plan_trigger(
    event: TriggerEvent, contracts: Sequence[Contract], ctx: TriggerContext
) -> tuple[SettlementReport | None, list[LedgerInstruction]]:
    """Settlement report (when the event settles a pool) plus instructions."""
    graph = ctx.graph
    if isinstance(event, ManuscriptConfirmed):
        _check_related(event.origin, contracts, (ContractState.ACTIVE, ContractState.LOCKED))
        node = graph.node(event.origin)
        if node.state is not ManuscriptState.CONFIRMED:
            raise errors.StateMismatch("manuscript is not confirmed")
        pool = sum(h.amount for h in ctx.holdings)
        cited = [graph.by_id(c) for c in node.citations]
        report = plan_confirmation_settlement(
            node,
            pool,
            cited,
            ctx.policy,
            treasury=ctx.treasury,
            clawbacks_for=lambda origin: clawbacks_for(origin, ctx.all_contracts),
        )
        flows = waterfall([(h.escrow_id, h.amount) for h in ctx.holdings], _aggregate(report))
        return report, [Release(eid, tuple(p)) for eid, p in flows.items()]

    if isinstance(event, Withdrawn):
        _check_related(event.origin, contracts, (ContractState.ACTIVE, ContractState.LOCKED))
        node = graph.node(event.origin)
        report, payouts = plan_withdrawal(node, ctx.holdings, ctx.policy, treasury=ctx.treasury)
        return report, [Release(eid, tuple(p), refund=True) for eid, p in payouts.items()]

    if isinstance(event, CitationReceived):
        cited = graph.by_id(event.cited_id)
        citing = graph.by_id(event.citing_id)
        _check_related(cited.origin, contracts, (ContractState.ACTIVE, ContractState.LOCKED))
        if ctx.payer is None:
            raise errors.StateMismatch("citation payments need a payer")
        lines = distribution_for_citation(
            cited,
            event.amount,
            citing,
            ctx.policy,
            treasury=ctx.treasury,
            clawbacks=clawbacks_for(cited.origin, ctx.all_contracts),
        )
        trigger = cited.authorship.contract
        return None, [Transfer(ctx.payer, addr, amt, trigger) for addr, amt, _ in lines if addr != ctx.payer]

    raise TypeError(f"unknown trigger event {event!r}")


def execute_trigger(event: TriggerEvent, contracts: Sequence[Contract], ctx: TriggerContext) -> list[LedgerInstruction]:
    """Pure: same (event, contracts, context) always yields the same list."""
    return plan_trigger(event, contracts, ctx)[1]
