import itertools
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from porledger import contracts as C
from porledger import errors
from porledger.contracts import Action, ContractKind, ContractState, ContractTerms, TRANSITIONS
from porledger.ecosystem import apportion
from porledger.graph import ManuscriptState, Verdict
from porledger.ledger import EscrowState
from porledger.policy import PolicyConfig

S = ContractState


def _contract(world, kind, names, **kw):
    return world.eco.propose_contract(kind, [world.u[n] for n in names], **kw)


def test_propose_authorship(world):
    world.user("a"), world.user("b")
    c = world.authorship(["a", "b"], shares=["3/5", "2/5"], stake=100, sign=False)
    assert c.state is S.PROPOSED and c.stake_required == 100
    assert c.shares == ((world.u["a"], Fraction(3, 5)), (world.u["b"], Fraction(2, 5)))


def test_review_needs_exactly_one_party(world):
    world.user("a"), world.user("r", optin=True), world.user("s", optin=True)
    node = world.submit(["a"], stake=10)
    with pytest.raises(errors.InvalidShares):
        _contract(world, ContractKind.REVIEW, ["r", "s"], target=node.origin)


def test_funding_terms_stored(world):
    world.user("a"), world.user("f")
    auth = world.authorship(["a"], stake=100, sign=False)
    terms = ContractTerms(covered_fraction=Fraction(1, 2), clawback_share=Fraction(1, 5))
    c = world.eco.propose_contract(ContractKind.FUNDING, [world.u["f"]], terms=terms, target=auth.id)
    assert c.state is S.PROPOSED and c.terms == terms and c.manuscript == auth.manuscript


@pytest.mark.parametrize(
    "shares,err",
    [(["1/2", "1/2", "0"], errors.InvalidShares), (["1/2", "1/3"], errors.InvalidShares)],
)
def test_bad_share_tables(world, shares, err):
    world.user("a"), world.user("b"), world.user("c")
    names = ["a", "b", "c"][: len(shares)]
    with pytest.raises(err):
        world.authorship(names, shares=shares, stake=10, sign=False)


def test_both_authors_sign_activates_with_stakes(world):
    world.user("a"), world.user("b")
    c = world.authorship(["a", "b"], shares=["3/5", "2/5"], stake=100, sign=False)
    c = world.eco.sign_contract(c.id, world.u["a"])
    assert c.state is S.SIGNED and world.bal("a") == (100, 0)
    c = world.eco.sign_contract(c.id, world.u["b"])
    assert c.state is S.ACTIVE
    assert world.bal("a") == (40, 60) and world.bal("b") == (60, 40)


def test_reviewer_short_of_funds_stays_proposed(make_world):
    w = make_world(PolicyConfig(reviewer_stake=10))
    w.user("a"), w.user("r", optin=True)
    node = w.submit(["a"], stake=10)
    w.submit(["r"], stake=95)  # leaves r with 5 spendable
    assert w.bal("r") == (5, 95)
    c = w.review_contract(node.origin, "r", sign=False)
    before = w.eco.state_digest()
    with pytest.raises(errors.InsufficientFunds):
        w.eco.sign_contract(c.id, w.u["r"])
    assert w.eco.contract(c.id).state is S.PROPOSED
    assert w.eco.state_digest() == before


def test_funding_covers_half_the_author_stake(world):
    world.user("a"), world.user("b"), world.user("f")
    auth = world.authorship(["a", "b"], shares=["3/5", "2/5"], stake=100, sign=False)
    terms = ContractTerms(covered_fraction=Fraction(1, 2))
    f = world.eco.propose_contract(ContractKind.FUNDING, [world.u["f"]], terms=terms, target=auth.id)
    world.eco.sign_contract(f.id, world.u["f"])
    for n in ("a", "b"):
        world.eco.sign_contract(auth.id, world.u[n])
    assert world.bal("f") == (50, 50)
    assert world.bal("a")[1] + world.bal("b")[1] == 50
    assert (world.bal("a")[1], world.bal("b")[1]) == (30, 20)
    assert world.eco.conservation_gap() == 0


def test_cover_after_activation_is_rejected(world):
    world.user("a"), world.user("f")
    auth = world.authorship(["a"], stake=100)
    terms = ContractTerms(covered_fraction=Fraction(1, 2))
    f = world.eco.propose_contract(ContractKind.FUNDING, [world.u["f"]], terms=terms, target=auth.id)
    with pytest.raises(errors.ContractInUse):
        world.eco.sign_contract(f.id, world.u["f"])


def test_cancel_proposed_review_has_no_ledger_effect(world):
    world.user("a"), world.user("r", optin=True)
    node = world.submit(["a"], stake=10)
    c = world.review_contract(node.origin, "r", sign=False)
    ledger_before = world.eco.ledger.export_text()
    c = world.eco.cancel_contract(c.id)
    assert c.state is S.CANCELLED
    assert world.eco.ledger.export_text() == ledger_before


def test_cancel_active_review_refunds_in_full(world):
    world.user("a"), world.user("r", optin=True)
    node = world.submit(["a"], stake=10)
    c = world.review_contract(node.origin, "r")
    assert world.bal("r") == (90, 10)
    (eid,) = [e.escrow_id for e in world.eco.ledger.escrows.values() if e.contract == c.id]
    world.eco.cancel_contract(c.id)
    assert world.bal("r") == (100, 0)
    assert world.eco.ledger.escrow(eid).state is EscrowState.REFUNDED


def test_cancel_review_after_voting_is_rejected(world):
    world.user("a"), world.user("r", optin=True)
    node = world.submit(["a"], stake=10)
    c = world.review_contract(node.origin, "r")
    world.eco.review(node.origin, world.u["r"], Verdict.REVISE, "x")
    with pytest.raises(errors.ContractInUse):
        world.eco.cancel_contract(c.id)


def test_cancel_locked_authorship(make_world):
    w = make_world(PolicyConfig(K=1))
    w.user("a"), w.user("r", optin=True)
    node = w.confirm(w.submit(["a"], stake=10).origin, ["r"])
    cid = node.authorship.contract
    assert w.eco.contract(cid).state is S.LOCKED
    with pytest.raises(errors.AlreadyLocked):
        w.eco.cancel_contract(cid)


def test_cancel_authorship_cascades(world):
    world.user("a"), world.user("f")
    auth = world.authorship(["a"], stake=10, sign=False)
    f = world.eco.propose_contract(ContractKind.FUNDING, [world.u["f"]], stake=5, target=auth.id)
    world.eco.sign_contract(f.id, world.u["f"])
    world.eco.cancel_contract(auth.id)
    assert world.eco.contract(f.id).state is S.CANCELLED


def test_pool_160_split_80_80(make_world):
    w = make_world(PolicyConfig(K=1, author_stake=100, reviewer_stake=10))
    for n in ("a", "b", "f"):
        w.user(n)
    w.user("r", optin=True)
    m1 = w.confirm(w.submit(["a"], stake=10).origin, ["r"])
    auth = w.authorship(["b"], stake=100)
    m2 = w.eco.submit(auth.id, "second", [m1.id, w.eco.genesis.id])
    f = w.eco.propose_contract(ContractKind.FUNDING, [w.u["f"]], stake=50, target=auth.id)
    w.eco.sign_contract(f.id, w.u["f"])
    w.eco.attach_remark(m2.origin, f.id)
    w.confirm(m2.origin, ["r"])
    report = w.eco.reports[-1]
    assert report.pool == 160
    assert sorted(a for _, a in report.per_citation) == [80, 80]
    assert sum(l.amount for l in report.lines) == 160
    assert all(w.eco.contract(c.id).state is S.LOCKED for c in w.eco.contracts_for(m2.origin))
    assert w.eco.conservation_gap() == 0


@pytest.mark.parametrize("rho,expect", [(Fraction(1, 2), (30, 20, 50)), (Fraction(1), (60, 40, 0))])
def test_withdraw_refunds(make_world, rho, expect):
    w = make_world(PolicyConfig(K=3, rho_refund=rho))
    w.user("a"), w.user("b"), w.user("f"), w.user("r", optin=True)
    auth = w.authorship(["a", "b"], shares=["3/5", "2/5"], stake=100)
    node = w.eco.submit(auth.id, "x", [w.eco.genesis.id])
    f = w.eco.propose_contract(ContractKind.FUNDING, [w.u["f"]], stake=20, target=auth.id)
    w.eco.sign_contract(f.id, w.u["f"])
    w.eco.attach_remark(node.origin, f.id)
    w.review_contract(node.origin, "r")
    w.eco.review(node.origin, w.u["r"], Verdict.CONFIRM, "ok")
    treasury_before = w.bal("T")[0]
    report = w.eco.withdraw(node.origin)
    a_back, b_back, to_treasury = expect
    assert w.bal("a") == (40 + a_back, 0) and w.bal("b") == (60 + b_back, 0)
    assert w.bal("T")[0] - treasury_before == to_treasury
    assert w.bal("r") == (100, 0) and w.bal("f") == (100, 0)
    assert report.event == "withdraw" and report.pool == 100 + 20 + 10
    assert w.eco.graph.node(node.origin).state is ManuscriptState.WITHDRAWN
    assert all(w.eco.contract(c.id).state is S.SETTLED for c in w.eco.contracts_for(node.origin))
    assert not w.eco.stake_before_voice_violations()


def test_withdraw_confirmed_is_locked(make_world):
    w = make_world(PolicyConfig(K=1))
    w.user("a"), w.user("r", optin=True)
    node = w.confirm(w.submit(["a"], stake=10).origin, ["r"])
    with pytest.raises(errors.LockedManuscript):
        w.eco.withdraw(node.origin)


def test_trigger_for_other_manuscript(world):
    world.user("a"), world.user("b")
    n1 = world.submit(["a"], stake=10)
    world.submit(["b"], stake=10)
    other = [c for c in world.eco.contracts.values() if c.manuscript != n1.origin]
    ctx = C.TriggerContext(graph=world.eco.graph, policy=world.eco.policy, treasury=world.eco.treasury)
    with pytest.raises(errors.StateMismatch):
        C.execute_trigger(C.Withdrawn(n1.origin), other, ctx)


def test_trigger_is_pure(world):
    world.user("a"), world.user("b")
    n1 = world.submit(["a", "b"], shares=["1/3", "2/3"], stake=10)
    ctx = C.TriggerContext(
        graph=world.eco.graph, policy=world.eco.policy, treasury=world.eco.treasury,
        holdings=world.eco.held_stakes(n1.origin),
    )
    related = world.eco.contracts_for(n1.origin)
    digest_before = world.eco.state_digest()
    first = C.execute_trigger(C.Withdrawn(n1.origin), related, ctx)
    assert first == C.execute_trigger(C.Withdrawn(n1.origin), related, ctx)
    assert world.eco.state_digest() == digest_before


@pytest.mark.parametrize("state,action", list(itertools.product(ContractState, Action)))
def test_transition_table_is_exhaustive(state, action):
    if (state, action) in TRANSITIONS:
        assert C.transition(state, action) is TRANSITIONS[(state, action)]
        return
    expected = errors.AlreadyLocked if state in (S.LOCKED, S.SETTLED) else errors.StateMismatch
    if state is S.ACTIVE and action is Action.SIGN:
        expected = errors.AlreadyActive
    with pytest.raises(expected):
        C.transition(state, action)


def test_terminal_contract_states_have_no_exits():
    assert not [k for k in TRANSITIONS if k[0] in (S.SETTLED, S.CANCELLED)]


@given(
    st.lists(st.integers(1, 50), min_size=1, max_size=6),
    st.lists(st.integers(0, 50), min_size=1, max_size=6),
)
def test_waterfall_preserves_both_sides(sources, sinks):
    diff = sum(sources) - sum(sinks)
    sinks = sinks + [diff] if diff > 0 else sinks
    sources = sources + [-diff] if diff < 0 else sources
    src = [(bytes([i]) * 32, a) for i, a in enumerate(sources)]
    snk = [(bytes([100 + i]) * 32, a) for i, a in enumerate(sinks)]
    flows = C.waterfall(src, snk)
    for sid, amount in src:
        assert sum(a for _, a in flows[sid]) == amount
        assert all(a > 0 for _, a in flows[sid])
    got = {}
    for lines in flows.values():
        for addr, a in lines:
            got[addr] = got.get(addr, 0) + a
    assert got == {addr: a for addr, a in snk if a}


@given(st.integers(0, 10**6), st.lists(st.integers(1, 30), min_size=1, max_size=8))
def test_apportion_is_exact(total, raw):
    weights = [Fraction(r, sum(raw)) for r in raw]
    out = apportion(total, weights)
    assert sum(out) == total
    assert all(abs(o - total * w) < 1 for o, w in zip(out, weights))
