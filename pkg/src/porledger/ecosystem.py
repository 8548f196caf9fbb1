"""The single-writer state machine tying ledger, user pool, publication graph
and contracts together.

Every public method is one command on the serialized log: it either applies
completely or raises before touching any state. Confirmation and its
settlement happen inside the same command.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Sequence

from porledger import contracts as C
from porledger import errors
from porledger.canonical import digest, encode, hash_bytes, hexs
from porledger.consensus import (
    SettlementReport,
    StakeHolding,
    StakeRole,
    confirming_reviewers,
    score_candidates,
    select_reviewers,
    tally_confirmations,
)
from porledger.contracts import Contract, ContractKind, ContractState, ContractTerms
from porledger.crypto import KeyPair, verify_signature
from porledger.graph import (
    ManuscriptNode,
    ManuscriptState,
    PublicationGraph,
    RemarkEntry,
    RemarkKind,
    ReviewRecord,
    Verdict,
)
from porledger.identity import IdentityPool, Profile, UserAccount, profile_message
from porledger.ledger import Clock, EscrowState, Ledger, Report, TxKind, verify_ledger
from porledger.policy import PolicyConfig
from porledger.rng import SeedStream

GENESIS_TEXT = "A network based blockchain ecosystem for peer review publication (genesis manuscript)"


class IneligibleReviewer(errors.StateMismatch):
    pass


@dataclass(frozen=True)
class Holding:
    contract: bytes
    manuscript: bytes
    role: StakeRole

    def __deepcopy__(self, memo):
        return self  # immutable value


def apportion(total: int, weights: Sequence[Fraction]) -> list[int]:
    """Exact-sum integer split: floors first, leftover grains by largest
    fractional part (ties to the earlier entry)."""
    exact = [total * w for w in weights]
    base = [math.floor(x) for x in exact]
    order = sorted(range(len(weights)), key=lambda i: (-(exact[i] - base[i]), i))
    for i in order[: total - sum(base)]:
        base[i] += 1
    return base


class Ecosystem:
    def __init__(
        self,
        policy: PolicyConfig | None = None,
        seed: int = 0,
        *,
        chain_shaped: bool = False,
        genesis_text: str = GENESIS_TEXT,
    ):
        self.policy = policy or PolicyConfig()
        self.seed = seed
        self.stream = SeedStream(seed)
        self.clock = Clock()
        self._authority = KeyPair.from_seed(self.stream.draw("treasury"))
        self.ledger = Ledger(self.policy.total_supply, self._authority, clock=self.clock, chain_shaped=chain_shaped)
        self.users = IdentityPool(self.ledger, self._authority, self.stream)
        self.graph = PublicationGraph(keys=self.ledger._keys)
        self.graph.init_genesis(hash_bytes(genesis_text.encode("utf-8")))
        self.contracts: dict[bytes, Contract] = {}
        self.holdings: dict[bytes, Holding] = {}
        self.reports: list[SettlementReport] = []
        self.invitations: dict[bytes, list[bytes]] = {}
        self.log: list[tuple[int, str]] = []
        self._nonce = 0

    # -- helpers -------------------------------------------------------

    @property
    def treasury(self) -> bytes:
        return self.ledger.treasury

    @property
    def genesis(self) -> ManuscriptNode:
        return self.graph.node(self.graph.genesis)

    def _keys(self, address: bytes) -> KeyPair:
        return self.users.get(address).keypair

    def _record(self, op: str) -> None:
        self.log.append((self.clock.tick, op))

    def contract(self, contract_id: bytes) -> Contract:
        try:
            return self.contracts[contract_id]
        except KeyError:
            raise errors.UnknownContract(hexs(contract_id)) from None

    def contracts_for(self, origin: bytes) -> list[Contract]:
        return [c for c in self.contracts.values() if c.manuscript == origin]

    def _lock(self, owner: bytes, amount: int, contract: Contract, origin: bytes, role: StakeRole) -> bytes:
        payload = self.ledger.lock_payload(owner, amount, contract.id)
        eid = self.ledger.escrow_lock(owner, amount, contract.id, self._keys(owner).sign(payload))
        self.holdings[eid] = Holding(contract.id, origin, role)
        return eid

    def held_stakes(self, origin: bytes) -> list[StakeHolding]:
        """Held escrows forming a manuscript's pool, in creation order."""
        out = []
        for eid, h in self.holdings.items():
            e = self.ledger.escrow(eid)
            if h.manuscript == origin and e.state is EscrowState.HELD:
                out.append(StakeHolding(eid, e.owner, e.amount, h.role))
        return out

    def _held_for_contract(self, contract_id: bytes) -> list[bytes]:
        return [
            eid
            for eid, h in self.holdings.items()
            if h.contract == contract_id and self.ledger.escrow(eid).state is EscrowState.HELD
        ]

    def snapshot(self) -> "Ecosystem":
        return copy.deepcopy(self)

    def state_digest(self) -> bytes:
        """Fingerprint of everything a later command can observe."""
        contracts = [
            {"id": c.id, "state": c.state.value, "signed": sorted(c.signed_by), "shares": [[a, s] for a, s in c.shares]}
            for c in sorted(self.contracts.values(), key=lambda c: c.id)
        ]
        users = [
            {"address": a, "profile": u.profile.to_record(), "reviews": u.reviews_completed}
            for a, u in sorted(self.users.accounts.items())
        ]
        return digest(
            {
                "ledger": self.ledger.export_text(),
                "graph": self.graph.export_nodelink(),
                "contracts": contracts,
                "users": users,
                "tick": self.clock.tick,
                "nonce": self._nonce,
                "stream": self.stream.counter,
                "reports": len(self.reports),
            }
        )

    def conservation_gap(self) -> int:
        """Zero exactly when spendable + escrowed equals the supply."""
        return self.ledger.total_spendable() + self.ledger.total_escrowed() - self.ledger.total_supply

    # -- users ---------------------------------------------------------

    def create_user(self, profile: Profile, name: str = "") -> UserAccount:
        account = self.users.create_account(profile, name=name)
        self._record(f"create-user {hexs(account.address)}")
        return account

    def update_profile(self, address: bytes, profile: Profile) -> UserAccount:
        sig = self._keys(address).sign(profile_message(address, profile))
        account = self.users.update_profile(address, profile, sig)
        self._record(f"update-profile {hexs(address)}")
        return account

    # -- contracts -----------------------------------------------------

    def propose_contract(
        self,
        kind: ContractKind,
        parties: Sequence[bytes],
        shares: Sequence[tuple[bytes, Fraction]] | None = None,
        stake: int | None = None,
        terms: ContractTerms | None = None,
        *,
        target: bytes | None = None,
    ) -> Contract:
        """``target`` is the manuscript origin for review contracts and the
        authorship contract id for funding/indexing contracts."""
        kind = ContractKind(kind)
        manuscript = None
        if kind is ContractKind.REVIEW:
            node = self.graph.node(target) if target is not None else None
            if node is None:
                raise errors.StateMismatch("review contracts must name a manuscript")
            if node.state is not ManuscriptState.UNDER_REVIEW:
                raise errors.NotUnderReview(f"manuscript is {node.state.value}")
            self._check_reviewer_eligible(node, parties[0] if parties else b"")
            manuscript = node.origin
        elif kind in (ContractKind.FUNDING, ContractKind.INDEXING):
            authorship = self.contract(target) if target is not None else None
            if authorship is None or authorship.kind is not ContractKind.AUTHORSHIP:
                raise errors.StateMismatch(f"{kind.value} contracts must target an authorship contract")
            node = self.graph.nodes.get(authorship.manuscript)
            if node is not None and node.state is not ManuscriptState.UNDER_REVIEW:
                raise errors.LockedManuscript(f"manuscript is {node.state.value}")
            manuscript = authorship.manuscript
        if stake is None:
            stake = {
                ContractKind.AUTHORSHIP: self.policy.author_stake,
                ContractKind.REVIEW: self.policy.reviewer_stake,
            }.get(kind, 0)
        contract = C.propose_contract(
            kind,
            parties,
            shares,
            stake,
            terms,
            manuscript=manuscript,
            nonce=self._nonce,
            is_known=lambda a: a in self.users.accounts,
        )
        self._nonce += 1
        self.contracts[contract.id] = contract
        self._record(f"propose-contract {kind.value} {hexs(contract.id)}")
        return contract

    def _check_reviewer_eligible(self, node: ManuscriptNode, reviewer: bytes) -> None:
        account = self.users.accounts.get(reviewer)
        if account is None:
            raise errors.UnknownParty(hexs(reviewer))
        if reviewer in node.authorship.addresses:
            raise errors.ReviewerIsAuthor("authors cannot review their own manuscript")
        if not account.profile.reviewer_opt_in:
            raise IneligibleReviewer("user has not opted in to reviewing")
        if reviewer in self._contracted_reviewers(node.origin):
            raise IneligibleReviewer("reviewer already holds a review contract for this manuscript")
        whitelist = self._whitelist(node.origin)
        if whitelist is not None and reviewer not in whitelist:
            raise IneligibleReviewer("reviewer is not on the indexing contract's whitelist")

    def _contracted_reviewers(self, origin: bytes) -> set[bytes]:
        return {
            c.parties[0]
            for c in self.contracts_for(origin)
            if c.kind is ContractKind.REVIEW and c.state is not ContractState.CANCELLED
        }

    def _whitelist(self, origin: bytes) -> set[bytes] | None:
        lists = [
            set(c.terms.whitelist)
            for c in self.contracts_for(origin)
            if c.kind is ContractKind.INDEXING and c.live and c.terms.whitelist is not None
        ]
        return set.intersection(*lists) if lists else None

    def required_confirmations(self, origin: bytes) -> int:
        overrides = [
            c.terms.k_override
            for c in self.contracts_for(origin)
            if c.kind is ContractKind.INDEXING and c.live and c.terms.k_override is not None
        ]
        return max(overrides) if overrides else self.policy.K

    def sign_contract(self, contract_id: bytes, party: bytes) -> Contract:
        contract = self.contract(contract_id)
        if party not in contract.parties:
            raise errors.NotAParty(hexs(party)[:12])
        sig = self._keys(party).sign(contract.signing_message())
        signed = C.sign_contract(contract, party, sig, self.ledger.keys[party])
        if not signed.all_signed():
            self.contracts[contract_id] = signed
            self._record(f"sign-contract {hexs(contract_id)} {hexs(party)}")
            return signed

        locks = self._activation_locks(signed)
        for owner, amount in locks:
            if self.ledger.balance_of(owner)[0] < amount:
                raise errors.InsufficientFunds(f"{hexs(owner)[:12]} cannot cover a stake of {amount}")
        role = {
            ContractKind.AUTHORSHIP: StakeRole.AUTHOR,
            ContractKind.FUNDING: StakeRole.AUTHOR,
            ContractKind.REVIEW: StakeRole.REVIEW,
        }.get(signed.kind)
        for owner, amount in locks:
            self._lock(owner, amount, signed, signed.manuscript, role)
        active = C.activate(signed)
        self.contracts[contract_id] = active
        self._record(f"sign-contract {hexs(contract_id)} {hexs(party)} activate")
        return active

    def _activation_locks(self, contract: Contract) -> list[tuple[bytes, int]]:
        """Escrows that must be created when ``contract`` activates."""
        if contract.kind is ContractKind.REVIEW:
            node = self.graph.node(contract.manuscript)
            if node.state is not ManuscriptState.UNDER_REVIEW:
                raise errors.NotUnderReview(f"manuscript is {node.state.value}")
            return [(contract.parties[0], contract.stake_required)]
        if contract.kind is ContractKind.FUNDING:
            authorship = self._authorship_of(contract.manuscript)
            covered = self._covered_amount(contract, authorship)
            if covered and authorship.state not in (ContractState.PROPOSED, ContractState.SIGNED):
                raise errors.ContractInUse("stake cover must be in place before the authorship contract activates")
            if covered + sum(self._covered_amount(f, authorship) for f in self._active_funding(authorship)) > authorship.stake_required:
                raise errors.InvalidShares("funding would cover more than the whole author stake")
            return [(contract.parties[0], covered)] if covered else []
        if contract.kind is ContractKind.AUTHORSHIP:
            covered = sum(self._covered_amount(f, contract) for f in self._active_funding(contract))
            owed = apportion(contract.stake_required - covered, [s for _, s in contract.shares])
            return [(a, amt) for (a, _), amt in zip(contract.shares, owed) if amt > 0]
        return []

    def _authorship_of(self, origin: bytes) -> Contract:
        for c in self.contracts.values():
            if c.kind is ContractKind.AUTHORSHIP and c.manuscript == origin:
                return c
        raise errors.UnknownContract("no authorship contract for this manuscript")

    def _active_funding(self, authorship: Contract) -> list[Contract]:
        return [
            c
            for c in self.contracts_for(authorship.manuscript)
            if c.kind is ContractKind.FUNDING and c.state is ContractState.ACTIVE
        ]

    @staticmethod
    def _covered_amount(funding: Contract, authorship: Contract) -> int:
        return math.floor(funding.terms.covered_fraction * authorship.stake_required)

    def cancel_contract(self, contract_id: bytes, parties: Iterable[bytes] | None = None) -> Contract:
        """Cancel with the given parties' signatures (default: all of them)
        and refund anything the contract holds in escrow. Cancelling an
        authorship contract also cancels funding and indexing contracts that
        were waiting on it."""
        contract = self.contract(contract_id)
        quorum = list(parties) if parties is not None else list(contract.parties)
        self._check_cancellable(contract)
        sigs = {}
        for p in quorum:
            if p not in self.users.accounts:
                raise errors.NotAParty(hexs(p)[:12])
            sigs[p] = self._keys(p).sign(contract.cancel_message())
        cancelled = C.cancel_contract(contract, sigs, self.ledger.keys)
        dependents = []
        if contract.kind is ContractKind.AUTHORSHIP:
            dependents = [
                replace(c, state=C.transition(c.state, C.Action.CANCEL))
                for c in self.contracts_for(contract.manuscript)
                if c.kind is not ContractKind.AUTHORSHIP and c.state is not ContractState.CANCELLED
            ]
        for c in [cancelled, *dependents]:
            for eid in self._held_for_contract(c.id):
                e = self.ledger.escrow(eid)
                self.ledger.escrow_release(eid, [(e.owner, e.amount)], refund=True)
            self.contracts[c.id] = c
        self._record(f"cancel-contract {hexs(contract_id)}")
        return cancelled

    def _check_cancellable(self, contract: Contract) -> None:
        C.transition(contract.state, C.Action.CANCEL)
        if contract.state is not ContractState.ACTIVE:
            return
        if contract.kind is ContractKind.AUTHORSHIP and contract.manuscript in self.graph.nodes:
            raise errors.ContractInUse("manuscript already submitted; withdraw it instead")
        if contract.kind is ContractKind.REVIEW:
            node = self.graph.node(contract.manuscript)
            if any(r.contract == contract.id for r in node.confirmations):
                raise errors.ContractInUse("reviewer already recorded a review under this contract")
        if contract.kind in (ContractKind.FUNDING, ContractKind.INDEXING):
            authorship = self._authorship_of(contract.manuscript)
            if authorship.state is ContractState.ACTIVE and self._covered_amount(contract, authorship):
                raise errors.ContractInUse("the manuscript's authorship stake already depends on it")
            node = self.graph.nodes.get(contract.manuscript)
            if node is not None and any(r.contract == contract.id for r in node.remarks):
                raise errors.ContractInUse("a remark on the manuscript is backed by this contract")

    # -- manuscripts ---------------------------------------------------

    def submit(
        self,
        authorship_id: bytes,
        content: str,
        citations: Iterable[bytes],
        keywords: Iterable[str] = (),
    ) -> ManuscriptNode:
        contract = self.contract(authorship_id)
        if contract.kind is not ContractKind.AUTHORSHIP:
            raise errors.StateMismatch("manuscripts are initiated by authorship contracts")
        if contract.state is not ContractState.ACTIVE:
            raise errors.MissingSignature("authorship contract is not signed by every author with stakes escrowed")
        kwargs = dict(author_stake=contract.stake_required, timestamp=self.clock.tick, keywords=keywords)
        content_digest = hash_bytes(content.encode("utf-8"))
        citations = list(citations)
        draft = self.graph.preview_submission(contract.shares, content_digest, citations, contract.id, **kwargs)
        message = draft.version_digest()
        sigs = {a: self._keys(a).sign(message) for a in contract.parties}
        node = self.graph.submit_manuscript(
            contract.shares, content_digest, citations, contract.id, signatures=sigs, **kwargs
        )
        self._record(f"submit {hexs(node.origin)}")
        return node

    def revise(
        self,
        origin: bytes,
        content: str,
        citations: Iterable[bytes] | None = None,
        authors: Sequence[tuple[bytes, Fraction]] | None = None,
    ) -> ManuscriptNode:
        node = self.graph.node(origin)
        if node.state is not ManuscriptState.UNDER_REVIEW:
            raise errors.LockedManuscript(f"manuscript is {node.state.value}")
        contract = self.contract(node.authorship.contract)
        if authors is not None:
            for a, _ in authors:
                if a not in self.users.accounts:
                    raise errors.UnknownParty(hexs(a))
            contract = C.edit_shares(contract, authors)
        content_digest = hash_bytes(content.encode("utf-8"))
        citations = list(citations) if citations is not None else None
        kwargs = dict(
            timestamp=self.clock.tick,
            new_citations=citations,
            updated_authors=contract.shares if authors is not None else None,
        )
        draft = self.graph.preview_revision(origin, content_digest, **kwargs)
        message = draft.version_digest()
        sigs = {a: self._keys(a).sign(message) for a in draft.authorship.addresses}
        node = self.graph.revise_manuscript(origin, content_digest, signatures=sigs, **kwargs)
        self.contracts[contract.id] = contract
        self._record(f"revise {hexs(origin)} v{node.version}")
        return node

    def invite(self, origin: bytes) -> list[bytes]:
        """Run reviewer selection and remember the invitation list."""
        node = self.graph.node(origin)
        seed = self.stream.peek("select-reviewers")
        chosen = select_reviewers(
            node,
            sorted(self.users.accounts.values(), key=lambda a: a.address),
            self.policy,
            seed,
            contracted=self._contracted_reviewers(origin),
            whitelist=self._whitelist(origin),
        )
        self.stream.draw("select-reviewers")
        self.invitations[origin] = chosen
        self._record(f"select-reviewers {hexs(origin)}")
        return chosen

    def review(self, origin: bytes, reviewer: bytes, verdict: Verdict, report: str) -> ManuscriptNode:
        node = self.graph.node(origin)
        if node.state is not ManuscriptState.UNDER_REVIEW:
            raise errors.NotUnderReview(f"manuscript is {node.state.value}")
        if reviewer in node.authorship.addresses:
            raise errors.ReviewerIsAuthor("authors cannot review their own manuscript")
        contract = next(
            (
                c
                for c in self.contracts_for(origin)
                if c.kind is ContractKind.REVIEW and c.parties[0] == reviewer and c.state is ContractState.ACTIVE
            ),
            None,
        )
        if contract is None or not self._held_for_contract(contract.id):
            raise errors.NoReviewContract("reviewer has no active, staked review contract for this manuscript")
        verdict = Verdict(verdict)
        vd = node.version_digest()
        record = ReviewRecord(
            reviewer=reviewer,
            contract=contract.id,
            stake=contract.stake_required,
            report=report,
            verdict=verdict,
            version_signed=node.version,
            signed_digest=vd,
        )
        record = replace(record, signature=self._keys(reviewer).sign(record.message()))
        node = self.graph.record_review(origin, record)
        self._record(f"review {hexs(origin)} {hexs(reviewer)} {verdict.value}")
        return node

    def attach_remark(
        self, origin: bytes, contract_id: bytes, kind: RemarkKind | None = None, terms: str = ""
    ) -> ManuscriptNode:
        node = self.graph.node(origin)
        if node.state is not ManuscriptState.UNDER_REVIEW:
            raise errors.LockedManuscript(f"manuscript is {node.state.value}")
        contract = self.contract(contract_id)
        if contract.kind not in (ContractKind.FUNDING, ContractKind.INDEXING) or contract.manuscript != origin:
            raise errors.StateMismatch("remarks are carried by a funding or indexing contract on this manuscript")
        if contract.state is not ContractState.ACTIVE:
            raise errors.MissingSignature("remark contract is not active")
        if any(r.contract == contract_id for r in node.remarks):
            raise errors.ContractInUse("this contract already carries a remark")
        if contract.stake_required <= 0:
            raise errors.ZeroStake("remark stakes must be positive")
        if kind is None:
            kind = RemarkKind.FUNDING if contract.kind is ContractKind.FUNDING else RemarkKind.INDEXING
        kind = RemarkKind(kind)
        if contract.kind is ContractKind.INDEXING and kind is not RemarkKind.INDEXING:
            raise errors.StateMismatch("indexing contracts carry indexing remarks")
        agent = contract.parties[0]
        entry = RemarkEntry(agent, kind, contract_id, contract.stake_required, hash_bytes(terms.encode("utf-8")))
        entry = replace(entry, signature=self._keys(agent).sign(entry.message(origin)))
        self._lock(agent, entry.stake, contract, origin, StakeRole.REMARK)
        node = self.graph.attach_remark(origin, entry)
        self._record(f"attach-remark {hexs(origin)} {hexs(contract_id)}")
        return node

    # -- consensus -----------------------------------------------------

    def try_confirm(self, origin: bytes) -> ManuscriptState:
        """Confirm and settle atomically once the tally reaches K."""
        node = self.graph.node(origin)
        if node.state is not ManuscriptState.UNDER_REVIEW:
            return node.state
        if tally_confirmations(node) < self.required_confirmations(origin):
            return node.state
        self.settle_on_confirmation(origin)
        return ManuscriptState.CONFIRMED

    def settle_on_confirmation(self, origin: bytes) -> SettlementReport:
        node = self.graph.node(origin)
        if node.state is not ManuscriptState.UNDER_REVIEW:
            raise errors.NotUnderReview(f"manuscript is {node.state.value}")
        # plan against a copy so nothing changes unless every release validates
        staged = replace(self.graph, nodes=dict(self.graph.nodes), _by_id=dict(self.graph._by_id))
        staged.confirm(origin)
        related = self._close_contracts(origin, settle=False)
        ctx = C.TriggerContext(
            graph=staged,
            policy=self.policy,
            treasury=self.treasury,
            holdings=self.held_stakes(origin),
            all_contracts={**self.contracts, **{c.id: c for c in related}},
        )
        report, instructions = C.plan_trigger(C.ManuscriptConfirmed(origin), [c for c in related if c.live], ctx)
        for ins in instructions:
            self.ledger.check_release(ins.escrow_id, ins.payout)
        self.graph.nodes, self.graph._by_id = staged.nodes, staged._by_id
        self._apply(instructions)
        for c in related:
            self.contracts[c.id] = c
        self._count_completed_reviews(self.graph.node(origin))
        self.reports.append(report)
        self._record(f"confirm {hexs(origin)}")
        return report

    def withdraw(self, origin: bytes) -> SettlementReport:
        """Authors pull the manuscript; stakes come back per the refund rule."""
        node = self.graph.node(origin)
        if node.state is not ManuscriptState.UNDER_REVIEW:
            raise errors.LockedManuscript(f"manuscript is {node.state.value}")
        message = encode({"withdraw": origin, "version": node.version})
        for a in node.authorship.addresses:
            if not verify_signature(self.ledger.keys[a], message, self._keys(a).sign(message)):
                raise errors.MissingSignature("every author must sign the withdrawal")
        related = self._close_contracts(origin, settle=True)
        ctx = C.TriggerContext(
            graph=self.graph, policy=self.policy, treasury=self.treasury, holdings=self.held_stakes(origin)
        )
        report, instructions = C.plan_trigger(C.Withdrawn(origin), [], ctx)
        for ins in instructions:
            self.ledger.check_release(ins.escrow_id, ins.payout)
        self._apply(instructions)
        for c in related:
            self.contracts[c.id] = c
        node = self.graph.withdraw(origin)
        report = replace(report, manuscript=node.id)
        self._count_completed_reviews(node)
        self.reports.append(report)
        self._record(f"withdraw {hexs(origin)}")
        return report

    def _close_contracts(self, origin: bytes, *, settle: bool) -> list[Contract]:
        """Lock (and optionally settle) live contracts; cancel pending ones.
        Returns the new contract values without storing them."""
        out = []
        for c in self.contracts_for(origin):
            if c.state is ContractState.ACTIVE:
                c = C.lock(c)
                if settle:
                    c = C.settle(c)
            elif c.state in (ContractState.PROPOSED, ContractState.SIGNED):
                c = replace(c, state=C.transition(c.state, C.Action.CANCEL))
            out.append(c)
        return out

    def _apply(self, instructions: Sequence[C.LedgerInstruction]) -> None:
        for ins in instructions:
            if isinstance(ins, C.Release):
                self.ledger.escrow_release(ins.escrow_id, list(ins.payout), refund=ins.refund)
            elif isinstance(ins, C.Transfer):
                payload = self.ledger.payload_for(TxKind.TRANSFER, ins.sender, ins.recipient, ins.amount, ins.trigger)
                self.ledger.transfer(ins.sender, ins.recipient, ins.amount, ins.trigger, self._keys(ins.sender).sign(payload))
            else:
                raise TypeError(f"unsupported instruction {ins!r}")

    def _count_completed_reviews(self, node: ManuscriptNode) -> None:
        for reviewer in sorted({r.reviewer for r in node.confirmations}):
            self.users.note_review_completed(reviewer)

    def advance_tick(self, n: int = 1) -> int:
        tick = self.clock.advance(n)
        self._record(f"advance-tick {n}")
        return tick

    # -- inspection ----------------------------------------------------

    def tally(self, origin: bytes) -> int:
        return tally_confirmations(self.graph.node(origin))

    def confirming_reviewers(self, origin: bytes) -> list[bytes]:
        return confirming_reviewers(self.graph.node(origin))

    def reviewer_scores(self, origin: bytes, seed: bytes):
        return score_candidates(
            self.graph.node(origin),
            self.users.accounts.values(),
            seed,
            contracted=self._contracted_reviewers(origin),
            whitelist=self._whitelist(origin),
        )

    def stake_before_voice_violations(self) -> list[str]:
        """Every review record must be backed by that reviewer's escrow under
        the same contract: held or released, or refunded after withdrawal."""
        out = []
        escrows = list(self.ledger.escrows.values())
        for node in self.graph.nodes.values():
            allowed = {EscrowState.HELD, EscrowState.RELEASED}
            if node.state is ManuscriptState.WITHDRAWN:
                allowed.add(EscrowState.REFUNDED)
            for rec in node.confirmations:
                if not any(e.owner == rec.reviewer and e.contract == rec.contract and e.state in allowed for e in escrows):
                    out.append(f"review by {hexs(rec.reviewer)[:12]} on {hexs(node.origin)[:12]} has no stake")
        return out

    def verify(self) -> Report:
        return Report(verify_ledger(self.ledger).violations + self.graph.verify().violations)
