import pytest

from conftest import World
from porledger import errors
from porledger.contracts import ContractKind, ContractState
from porledger.ecosystem import Ecosystem
from porledger.graph import ManuscriptState, Verdict
from porledger.identity import Profile
from porledger.ledger import verify_ledger
from porledger.policy import PolicyConfig


def _lifecycle(w):
    for n in ("a", "b", "f"):
        w.user(n)
    for n in ("r1", "r2", "r3"):
        w.user(n, keywords=["ledgers"], optin=True)
    m1 = w.confirm(w.submit(["a"]).origin, ["r1", "r2"])
    auth = w.authorship(["a", "b"], shares=["1/2", "1/2"])
    m2 = w.eco.submit(auth.id, "second", [m1.id, w.eco.genesis.id], ["ledgers"])
    f = w.eco.propose_contract(ContractKind.FUNDING, [w.u["f"]], stake=20, target=auth.id)
    w.eco.sign_contract(f.id, w.u["f"])
    w.eco.attach_remark(m2.origin, f.id)
    w.review_contract(m2.origin, "r3")
    w.eco.review(m2.origin, w.u["r3"], Verdict.REVISE, "more")
    w.eco.revise(m2.origin, "second, revised")
    w.confirm(m2.origin, ["r1", "r2"])
    m3 = w.submit(["b"], cites=[m1.id], content="third")
    w.review_contract(m3.origin, "r3")
    w.eco.withdraw(m3.origin)
    return w


LOW = PolicyConfig(author_stake=40)


def test_full_lifecycle_verifies():
    w = _lifecycle(World(LOW))
    assert w.eco.verify().ok
    assert w.eco.conservation_gap() == 0
    assert w.eco.stake_before_voice_violations() == []
    states = sorted(n.state.value for n in w.eco.graph.nodes.values())
    assert states == ["confirmed", "confirmed", "confirmed", "withdrawn"]


def test_chain_shaped_ledger_runs_same_lifecycle():
    w = World()
    w.eco = Ecosystem(LOW, 1, chain_shaped=True)
    _lifecycle(w)
    txs = w.eco.ledger.transactions
    assert all(len(t.parents) == 1 for t in txs[1:])
    assert verify_ledger(w.eco.ledger).ok


def test_rejected_commands_leave_state_untouched(world):
    world.user("a"), world.user("r", optin=True), world.user("poor")
    node = world.submit(["a"])
    poor = world.authorship(["poor"], stake=500, sign=False)
    before = world.eco.state_digest()
    bad = [
        lambda: world.eco.review(node.origin, world.u["r"], Verdict.CONFIRM, "no stake"),
        lambda: world.eco.sign_contract(poor.id, world.u["poor"]),
        lambda: world.eco.submit(b"\x00" * 32, "x", [world.eco.genesis.id]),
        lambda: world.eco.revise(world.eco.genesis.origin, "x"),
        lambda: world.eco.withdraw(world.eco.genesis.origin),
        lambda: world.eco.update_profile(b"\x07" * 32, Profile()),
    ]
    for call in bad:
        with pytest.raises(errors.ProtocolError):
            call()
        assert world.eco.state_digest() == before


def test_review_without_stake_rejected(world):
    world.user("a"), world.user("r", optin=True)
    node = world.submit(["a"])
    world.review_contract(node.origin, "r", sign=False)
    with pytest.raises(errors.ProtocolError):
        world.eco.review(node.origin, world.u["r"], Verdict.CONFIRM, "unstaked")
    assert world.eco.graph.node(node.origin).confirmations == ()


def test_snapshot_is_independent(world):
    world.user("a")
    snap = world.eco.snapshot()
    before = snap.state_digest()
    world.submit(["a"])
    assert snap.state_digest() == before != world.eco.state_digest()


def test_same_commands_same_digest():
    digests = {_lifecycle(World(LOW, 9)).eco.state_digest() for _ in range(2)}
    assert len(digests) == 1
    assert _lifecycle(World(LOW, 10)).eco.state_digest() not in digests


def test_withdrawal_settles_open_contracts(world):
    world.user("a"), world.user("r", optin=True)
    node = world.submit(["a"])
    rc = world.review_contract(node.origin, "r")
    world.eco.withdraw(node.origin)
    assert world.eco.graph.node(node.origin).state is ManuscriptState.WITHDRAWN
    assert world.eco.contract(rc.id).state is ContractState.SETTLED
    assert world.bal("r") == (100, 0)
    assert world.bal("a") == (50, 0)


def test_terminal_manuscript_is_frozen(make_world):
    w = make_world(PolicyConfig(K=1))
    w.user("a"), w.user("r", optin=True), w.user("s", optin=True)
    node = w.confirm(w.submit(["a"]).origin, ["r"])
    before = w.eco.state_digest()
    for call in (
        lambda: w.eco.withdraw(node.origin),
        lambda: w.review_contract(node.origin, "s"),
        lambda: w.eco.revise(node.origin, "late"),
    ):
        with pytest.raises(errors.ProtocolError):
            call()
    assert w.eco.state_digest() == before


def test_held_stakes_track_pool(world):
    world.user("a"), world.user("r", optin=True)
    node = world.submit(["a"])
    world.review_contract(node.origin, "r")
    assert sorted(h.amount for h in world.eco.held_stakes(node.origin)) == [10, 100]


def test_advance_tick_moves_clock(world):
    t0 = world.eco.clock.tick
    assert world.eco.advance_tick(3) == t0 + 3
