import random

import pytest

from oracles import replay_export
from porledger import errors
from porledger.canonical import hexs
from porledger.crypto import KeyPair
from porledger.ledger import (
    SYSTEM,
    EscrowState,
    Ledger,
    TxKind,
    init_ledger,
    load_balances,
    parse_export,
    verify_export_text,
    verify_ledger,
)

T_KEYS = KeyPair.from_seed(b"\xee" * 32)
CONTRACT = b"\xcc" * 32


class Book:
    """Ledger plus a few funded accounts with their keys."""

    def __init__(self, supply=10**9, chain=False, **kw):
        self.ledger = Ledger(supply, T_KEYS, chain_shaped=chain)
        self.keys = {}

    def account(self, name, funds=0):
        kp = KeyPair.from_seed(name.encode().ljust(32, b"."))
        addr = self.ledger.register(kp.public_key)
        self.keys[addr] = kp
        if funds:
            self.grant(addr, funds)
        return addr

    def grant(self, addr, amount):
        lg = self.ledger
        payload = lg.payload_for(TxKind.TRANSFER, lg.treasury, addr, amount, SYSTEM)
        return lg.transfer(lg.treasury, addr, amount, SYSTEM, T_KEYS.sign(payload))

    def send(self, a, b, amount, trigger=CONTRACT):
        payload = self.ledger.payload_for(TxKind.TRANSFER, a, b, amount, trigger)
        return self.ledger.transfer(a, b, amount, trigger, self.keys[a].sign(payload))

    def lock(self, owner, amount, contract=CONTRACT):
        payload = self.ledger.lock_payload(owner, amount, contract)
        return self.ledger.escrow_lock(owner, amount, contract, self.keys[owner].sign(payload))


def test_genesis_allocation():
    lg = init_ledger(10**9, T_KEYS)
    assert lg.balance_of(T_KEYS.address) == (10**9, 0)
    assert lg.transactions[0].kind is TxKind.MINT
    assert verify_ledger(lg).ok


@pytest.mark.parametrize("supply", [0, -5])
def test_zero_supply_rejected(supply):
    with pytest.raises(errors.ZeroSupply):
        Ledger(supply, T_KEYS)


def test_full_balance_transfer():
    b = Book()
    a, c = b.account("a", 50), b.account("c")
    b.send(a, c, 50)
    assert b.ledger.balance_of(a) == (0, 0)
    assert b.ledger.balance_of(c) == (50, 0)


def test_overdraft_leaves_ledger_unchanged():
    b = Book()
    a, c = b.account("a", 10), b.account("c")
    before = b.ledger.export_text()
    payload = b.ledger.payload_for(TxKind.TRANSFER, a, c, 11, CONTRACT)
    with pytest.raises(errors.InsufficientFunds):
        b.ledger.transfer(a, c, 11, CONTRACT, b.keys[a].sign(payload))
    assert b.ledger.export_text() == before


def test_transfer_rejections():
    b = Book()
    a, c = b.account("a", 10), b.account("c")
    with pytest.raises(errors.ZeroAmount):
        b.send(a, c, 0)
    with pytest.raises(errors.StateMismatch):
        b.send(a, c, 1, trigger=SYSTEM)
    with pytest.raises(errors.UnknownAddress):
        b.send(a, b"\x01" * 32, 1)
    payload = b.ledger.payload_for(TxKind.TRANSFER, a, c, 1, CONTRACT)
    with pytest.raises(errors.BadSignature):
        b.ledger.transfer(a, c, 1, CONTRACT, b.keys[c].sign(payload))


def test_lock_and_balance():
    b = Book()
    a = b.account("a", 100)
    eid = b.lock(a, 40)
    assert b.ledger.balance_of(a) == (60, 40)
    assert b.ledger.escrow(eid).state is EscrowState.HELD
    with pytest.raises(errors.ZeroStake):
        b.lock(a, 0)
    with pytest.raises(errors.InsufficientFunds):
        b.lock(a, 61)


def test_release_full_to_other_is_released():
    b = Book()
    a, x = b.account("a", 100), b.account("x")
    eid = b.lock(a, 40)
    b.ledger.escrow_release(eid, [(x, 40)])
    assert b.ledger.balance_of(x) == (40, 0)
    assert b.ledger.escrow(eid).state is EscrowState.RELEASED
    with pytest.raises(errors.AlreadyTerminal):
        b.ledger.escrow_release(eid, [(x, 40)])


def test_release_back_to_owner_is_refunded():
    b = Book()
    a = b.account("a", 100)
    eid = b.lock(a, 40)
    b.ledger.escrow_release(eid, [(a, 40)])
    assert b.ledger.escrow(eid).state is EscrowState.REFUNDED
    assert b.ledger.balance_of(a) == (100, 0)


def test_refund_flag_overrides_inference():
    b = Book()
    a = b.account("a", 100)
    eid = b.lock(a, 40)
    b.ledger.escrow_release(eid, [(a, 40)], refund=False)
    assert b.ledger.escrow(eid).state is EscrowState.RELEASED


def test_payout_mismatch():
    b = Book()
    a, x = b.account("a", 100), b.account("x")
    eid = b.lock(a, 40)
    with pytest.raises(errors.PayoutMismatch):
        b.ledger.escrow_release(eid, [(x, 30)])
    with pytest.raises(errors.PayoutMismatch):
        b.ledger.escrow_release(eid, [(x, 50), (a, -10)])
    assert b.ledger.escrow(eid).state is EscrowState.HELD


def test_three_way_release_conserves():
    b = Book()
    a, x, y = b.account("a", 100), b.account("x"), b.account("y")
    eid = b.lock(a, 40)
    tx_ids = b.ledger.escrow_release(eid, [(x, 13), (y, 13), (b.ledger.treasury, 14)])
    assert len(tx_ids) == 3
    lg = b.ledger
    assert lg.total_spendable() + lg.total_escrowed() == lg.total_supply
    assert lg.balance_of(x) == (13, 0) and lg.balance_of(y) == (13, 0)
    assert lg.balance_of(a) == (60, 0)


def test_dag_parents_are_previous_operation():
    b = Book()
    a, x, y = b.account("a", 100), b.account("x"), b.account("y")
    eid = b.lock(a, 40)
    ids = b.ledger.escrow_release(eid, [(x, 20), (y, 20)])
    assert b.ledger.frontier == tuple(ids)
    tid = b.send(a, x, 1)
    assert b.ledger.get(tid).parents == tuple(ids)


def test_chain_mode_links_each_tx():
    b = Book(chain=True)
    a, x, y = b.account("a", 100), b.account("x"), b.account("y")
    eid = b.lock(a, 40)
    b.ledger.escrow_release(eid, [(x, 20), (y, 20)])
    txs = b.ledger.transactions
    assert all(txs[i].parents == (txs[i - 1].tx_id,) for i in range(1, len(txs)))
    assert verify_ledger(b.ledger).ok


def test_tampered_amount_flags_hash():
    b = Book()
    a, x = b.account("a", 100), b.account("x")
    b.send(a, x, 7)
    text = b.ledger.export_text()
    lines = text.splitlines()
    i = next(i for i, l in enumerate(lines) if l.startswith("tx") and " transfer " in l and " 7 " in l)
    lines[i] = lines[i].replace(" 7 ", " 8 ")
    report = verify_export_text("\n".join(lines) + "\n")
    assert not report.ok
    assert any("hash mismatch" in v for v in report.violations)


def test_export_round_trip_and_strictness():
    b = Book()
    a, x = b.account("a", 100), b.account("x")
    b.send(a, x, 5)
    text = b.ledger.export_text()
    data = parse_export(text)
    assert len(data.transactions) == len(b.ledger.transactions)
    with pytest.raises(errors.ParseError):
        parse_export(text.rstrip("\n"))
    with pytest.raises(errors.ParseError):
        parse_export(text.replace("supply 1000000000", "supply 01000000000"))


def _random_ledger(seed, n_tx):
    rng = random.Random(seed)
    b = Book()
    users = [b.account(f"u{i}", 1000) for i in range(8)]
    held = []
    while len(b.ledger.transactions) < n_tx:
        op = rng.random()
        u = rng.choice(users)
        spend = b.ledger.balance_of(u)[0]
        if op < 0.5 and spend:
            b.send(u, rng.choice(users), rng.randint(1, spend))
        elif op < 0.75 and spend:
            held.append((b.lock(u, rng.randint(1, spend)), u))
        elif held:
            eid, _ = held.pop(rng.randrange(len(held)))
            amount = b.ledger.escrow(eid).amount
            cut = rng.randint(0, amount)
            b.ledger.escrow_release(eid, [(rng.choice(users), cut), (rng.choice(users + [b.ledger.treasury]), amount - cut)])
    return b


def test_thousand_tx_ledger_replays():
    b = _random_ledger(11, 1000)
    lg = b.ledger
    assert verify_ledger(lg).ok
    spendable, held, supply = replay_export(lg.export_text())
    assert supply == lg.total_supply
    for addr in lg.keys:
        assert spendable.get(hexs(addr), 0) == lg.balance_of(addr)[0]
    assert sum(held.values()) == lg.total_escrowed()
    assert sum(spendable.values()) + sum(held.values()) == supply
    _, balances = load_balances(lg.export_text())
    assert balances == {a: lg.balance_of(a) for a in lg.keys}
