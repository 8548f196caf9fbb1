"""Token transaction graph: pre-mined supply, transfers, escrow, verification.

The ledger is a DAG of signed transactions. Every transaction produced by one
ledger operation takes the frontier tips at the start of that operation as its
parents, so a multi-line escrow release fans out and the next operation joins
the branches back together. ``chain_shaped=True`` degrades this to a plain
chain (each transaction's only parent is its predecessor).

Escrowed tokens sit at an escrow address (the escrow id). Locks move tokens
from the owner to that address, releases move them out again, so the whole
history is a double-entry log and balances can be replayed from it alone.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

from porledger import errors
from porledger.canonical import ZERO_HASH, digest, encode, hexs, unhex
from porledger.crypto import KeyPair, address_of, verify_signature

DEFAULT_SUPPLY = 10**9
SYSTEM = ZERO_HASH  # trigger for genesis and gift grants
MINT_SOURCE = ZERO_HASH

EXPORT_MAGIC = "porledger-ledger 1"


class TxKind(str, enum.Enum):
    MINT = "mint"
    TRANSFER = "transfer"
    LOCK = "lock"
    RELEASE = "release"


class EscrowState(str, enum.Enum):
    HELD = "held"
    RELEASED = "released"
    REFUNDED = "refunded"


@dataclass(frozen=True)
class TokenTransaction:
    tx_id: bytes
    kind: TxKind
    sender: bytes
    recipient: bytes
    amount: int
    trigger: bytes
    parents: tuple[bytes, ...]
    timestamp: int
    signature: bytes

    def __deepcopy__(self, memo):
        return self  # immutable value

    def body(self) -> dict:
        return _tx_body(
            self.kind, self.sender, self.recipient, self.amount, self.trigger, self.parents, self.timestamp
        )

    def compute_id(self) -> bytes:
        return _tx_id(self.body(), self.signature)

    def export_line(self) -> str:
        parents = ",".join(hexs(p) for p in self.parents) or "-"
        return " ".join(
            [
                "tx",
                hexs(self.tx_id),
                self.kind.value,
                hexs(self.sender),
                hexs(self.recipient),
                str(self.amount),
                hexs(self.trigger),
                parents,
                str(self.timestamp),
                hexs(self.signature),
            ]
        )


def _tx_body(kind, sender, recipient, amount, trigger, parents, timestamp) -> dict:
    return {
        "kind": TxKind(kind).value,
        "from": sender,
        "to": recipient,
        "amount": amount,
        "trigger": trigger,
        "parents": list(parents),
        "timestamp": timestamp,
    }


def _tx_id(body: dict, signature: bytes) -> bytes:
    return digest({"body": body, "signature": signature})


@dataclass(frozen=True)
class EscrowEntry:
    escrow_id: bytes
    owner: bytes
    amount: int
    contract: bytes
    state: EscrowState = EscrowState.HELD

    def __deepcopy__(self, memo):
        return self  # immutable value


class Clock:
    """Logical tick shared by every layer; never wall time."""

    def __init__(self, tick: int = 0):
        self.tick = tick

    def advance(self, n: int = 1) -> int:
        if n < 0:
            raise ValueError("ticks only move forward")
        self.tick += n
        return self.tick


@dataclass(frozen=True)
class Report:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class LedgerSnapshot:
    transactions: tuple[TokenTransaction, ...]
    spendable: Mapping[bytes, int]
    escrows: Mapping[bytes, EscrowEntry]
    total_supply: int
    treasury: bytes

    def balance_of(self, addr: bytes) -> tuple[int, int]:
        if addr not in self.spendable:
            raise errors.UnknownAddress(hexs(addr))
        held = sum(e.amount for e in self.escrows.values() if e.owner == addr and e.state is EscrowState.HELD)
        return self.spendable[addr], held


class Ledger:
    def __init__(
        self,
        total_supply: int,
        authority: KeyPair,
        *,
        chain_shaped: bool = False,
        clock: Clock | None = None,
    ):
        if not isinstance(total_supply, int) or total_supply <= 0:
            raise errors.ZeroSupply("total supply must be a positive integer")
        self.total_supply = total_supply
        self.chain_shaped = chain_shaped
        self.clock = clock or Clock()
        self._authority = authority
        self.treasury = authority.address
        self.transactions: list[TokenTransaction] = []
        self._by_id: dict[bytes, TokenTransaction] = {}
        self._keys: dict[bytes, bytes] = {}
        self._spendable: dict[bytes, int] = {}
        self._escrowed: dict[bytes, int] = {}
        self._escrows: dict[bytes, EscrowEntry] = {}
        self._frontier: tuple[bytes, ...] = ()
        self.register(authority.public_key)
        body = _tx_body(TxKind.MINT, MINT_SOURCE, self.treasury, total_supply, SYSTEM, (), self.clock.tick)
        self._append([(body, authority.sign(encode(body)))])
        self._spendable[self.treasury] = total_supply

    # -- reads ---------------------------------------------------------

    @property
    def keys(self) -> Mapping[bytes, bytes]:
        return MappingProxyType(self._keys)

    @property
    def escrows(self) -> Mapping[bytes, EscrowEntry]:
        return MappingProxyType(self._escrows)

    @property
    def frontier(self) -> tuple[bytes, ...]:
        return self._frontier

    def is_known(self, addr: bytes) -> bool:
        return addr in self._keys

    def balance_of(self, addr: bytes) -> tuple[int, int]:
        """(spendable, escrowed) for a known account address."""
        if addr not in self._keys:
            raise errors.UnknownAddress(hexs(addr))
        return self._spendable.get(addr, 0), self._escrowed.get(addr, 0)

    def escrow(self, escrow_id: bytes) -> EscrowEntry:
        try:
            return self._escrows[escrow_id]
        except KeyError:
            raise errors.UnknownEscrow(hexs(escrow_id)) from None

    def total_spendable(self) -> int:
        return sum(self._spendable.values())

    def total_escrowed(self) -> int:
        return sum(self._escrowed.values())

    def get(self, tx_id: bytes) -> TokenTransaction:
        return self._by_id[tx_id]

    def snapshot(self) -> LedgerSnapshot:
        return LedgerSnapshot(
            transactions=tuple(self.transactions),
            spendable=MappingProxyType(dict(self._spendable)),
            escrows=MappingProxyType(dict(self._escrows)),
            total_supply=self.total_supply,
            treasury=self.treasury,
        )

    # -- writes --------------------------------------------------------

    def register(self, public_key: bytes) -> bytes:
        addr = address_of(public_key)
        if addr in self._escrows:
            raise errors.UnknownAddress("address collides with an escrow id")
        self._keys.setdefault(addr, public_key)
        self._spendable.setdefault(addr, 0)
        return addr

    def payload_for(self, kind: TxKind, sender: bytes, recipient: bytes, amount: int, trigger: bytes) -> bytes:
        """Bytes the sender must sign for the next single-transaction operation."""
        return encode(_tx_body(kind, sender, recipient, amount, trigger, self._next_parents(), self.clock.tick))

    def lock_payload(self, owner: bytes, amount: int, contract: bytes) -> bytes:
        return self.payload_for(TxKind.LOCK, owner, self._next_escrow_id(owner, contract), amount, contract)

    def transfer(self, sender: bytes, recipient: bytes, amount: int, trigger: bytes, sig: bytes) -> bytes:
        self._require_known(sender)
        self._require_known(recipient)
        if amount <= 0:
            raise errors.ZeroAmount("transfers must move at least one grain")
        if trigger == SYSTEM and sender != self.treasury:
            raise errors.StateMismatch("only treasury grants may use the system trigger")
        if self._spendable[sender] < amount:
            raise errors.InsufficientFunds(f"spendable {self._spendable[sender]} < {amount}")
        body = _tx_body(TxKind.TRANSFER, sender, recipient, amount, trigger, self._next_parents(), self.clock.tick)
        if not verify_signature(self._keys[sender], encode(body), sig):
            raise errors.BadSignature("transfer signature does not verify")
        (tx_id,) = self._append([(body, sig)])
        self._spendable[sender] -= amount
        self._spendable[recipient] += amount
        return tx_id

    def escrow_lock(self, owner: bytes, amount: int, contract: bytes, sig: bytes) -> bytes:
        self._require_known(owner)
        if amount <= 0:
            raise errors.ZeroStake("stakes must be positive")
        if self._spendable[owner] < amount:
            raise errors.InsufficientFunds(f"spendable {self._spendable[owner]} < {amount}")
        escrow_id = self._next_escrow_id(owner, contract)
        body = _tx_body(TxKind.LOCK, owner, escrow_id, amount, contract, self._next_parents(), self.clock.tick)
        if not verify_signature(self._keys[owner], encode(body), sig):
            raise errors.BadSignature("lock signature does not verify")
        self._append([(body, sig)])
        self._spendable[owner] -= amount
        self._escrowed[owner] = self._escrowed.get(owner, 0) + amount
        self._escrows[escrow_id] = EscrowEntry(escrow_id, owner, amount, contract)
        return escrow_id

    def escrow_release(
        self, escrow_id: bytes, payout: Sequence[tuple[bytes, int]], *, refund: bool | None = None
    ) -> list[bytes]:
        """Drain a held escrow along ``payout``; zero-amount lines are dropped.

        The escrow ends Refunded when the whole amount goes back to its owner,
        Released otherwise. ``refund`` overrides that guess: settlement passes
        False so a coincidental self-payout still reads as Released."""
        entry = self.check_release(escrow_id, payout)
        lines = [(addr, amt) for addr, amt in payout if amt > 0]
        parents = self._next_parents()
        batch = [
            _tx_body(TxKind.RELEASE, escrow_id, addr, amt, entry.contract, parents, self.clock.tick)
            for addr, amt in lines
        ]
        tx_ids = self._append_release(batch)
        for addr, amt in lines:
            self._spendable[addr] += amt
        self._escrowed[entry.owner] -= entry.amount
        if refund is None:
            refund = len(lines) == 1 and lines[0][0] == entry.owner
        self._escrows[escrow_id] = replace(entry, state=EscrowState.REFUNDED if refund else EscrowState.RELEASED)
        return tx_ids

    def check_release(self, escrow_id: bytes, payout: Sequence[tuple[bytes, int]]) -> EscrowEntry:
        """Validate a release without applying it."""
        entry = self.escrow(escrow_id)
        if entry.state is not EscrowState.HELD:
            raise errors.AlreadyTerminal(f"escrow {hexs(escrow_id)[:12]} is {entry.state.value}")
        for addr, amt in payout:
            if not isinstance(amt, int) or amt < 0:
                raise errors.PayoutMismatch("payout amounts must be non-negative integers")
            self._require_known(addr)
        total = sum(amt for _, amt in payout)
        if total != entry.amount:
            raise errors.PayoutMismatch(f"payout {total} != escrow {entry.amount}")
        return entry

    # -- internals -----------------------------------------------------

    def _require_known(self, addr: bytes) -> None:
        if addr not in self._keys:
            raise errors.UnknownAddress(hexs(addr))

    def _next_parents(self) -> tuple[bytes, ...]:
        if self.chain_shaped:
            return (self.transactions[-1].tx_id,) if self.transactions else ()
        return self._frontier

    def _next_escrow_id(self, owner: bytes, contract: bytes) -> bytes:
        return digest({"escrow": owner, "contract": contract, "seq": len(self._escrows)})

    def _append(self, signed: Iterable[tuple[dict, bytes]]) -> list[bytes]:
        new = []
        for body, sig in signed:
            tx = TokenTransaction(
                tx_id=_tx_id(body, sig),
                kind=TxKind(body["kind"]),
                sender=body["from"],
                recipient=body["to"],
                amount=body["amount"],
                trigger=body["trigger"],
                parents=tuple(body["parents"]),
                timestamp=body["timestamp"],
                signature=sig,
            )
            self.transactions.append(tx)
            self._by_id[tx.tx_id] = tx
            new.append(tx.tx_id)
        self._frontier = tuple(new) if not self.chain_shaped else (new[-1],)
        return new

    def _append_release(self, bodies: list[dict]) -> list[bytes]:
        if not self.chain_shaped:
            return self._append((b, self._authority.sign(encode(b))) for b in bodies)
        ids = []
        for b in bodies:
            b["parents"] = list(self._next_parents())
            ids += self._append([(b, self._authority.sign(encode(b)))])
        return ids

    # -- export --------------------------------------------------------

    def export_text(self) -> str:
        return render_export(
            self.total_supply,
            self.treasury,
            "chain" if self.chain_shaped else "dag",
            self._keys,
            self.transactions,
        )


def init_ledger(total_supply: int, authority: KeyPair, **kwargs) -> Ledger:
    """Genesis: mint the whole supply to the authority's (treasury) address."""
    return Ledger(total_supply, authority, **kwargs)


# ---------------------------------------------------------------------------
# Line-oriented export
# ---------------------------------------------------------------------------


@dataclass
class LedgerExport:
    total_supply: int
    treasury: bytes
    mode: str
    keys: dict[bytes, bytes]
    transactions: list[TokenTransaction] = field(default_factory=list)


def render_export(
    total_supply: int,
    treasury: bytes,
    mode: str,
    keys: Mapping[bytes, bytes],
    transactions: Iterable[TokenTransaction],
) -> str:
    lines = [EXPORT_MAGIC, f"supply {total_supply}", f"treasury {hexs(treasury)}", f"mode {mode}"]
    lines += [f"key {hexs(a)} {hexs(keys[a])}" for a in sorted(keys)]
    lines += [tx.export_line() for tx in transactions]
    return "\n".join(lines) + "\n"


def _parse_int(text: str) -> int:
    if not text.isdigit() or str(int(text)) != text:
        raise ValueError(f"non-canonical integer {text!r}")
    return int(text)


def parse_export(text: str) -> LedgerExport:
    """Strict parse; anything that would not re-render byte-identically fails."""
    if not text.endswith("\n"):
        raise errors.ParseError("ledger export must end with a newline")
    lines = text[:-1].split("\n")
    lineno = 0
    try:
        if lines[0] != EXPORT_MAGIC:
            raise ValueError("bad magic line")
        lineno = 1
        tag, value = lines[1].split(" ")
        if tag != "supply":
            raise ValueError("expected supply")
        supply = _parse_int(value)
        lineno = 2
        tag, value = lines[2].split(" ")
        if tag != "treasury":
            raise ValueError("expected treasury")
        treasury = unhex(value, 32)
        lineno = 3
        tag, mode = lines[3].split(" ")
        if tag != "mode" or mode not in ("dag", "chain"):
            raise ValueError("expected mode dag|chain")
        out = LedgerExport(supply, treasury, mode, {})
        for lineno in range(4, len(lines)):
            parts = lines[lineno].split(" ")
            if parts[0] == "key" and len(parts) == 3 and not out.transactions:
                out.keys[unhex(parts[1], 32)] = unhex(parts[2], 32)
            elif parts[0] == "tx" and len(parts) == 10:
                parents = () if parts[7] == "-" else tuple(unhex(p, 32) for p in parts[7].split(","))
                out.transactions.append(
                    TokenTransaction(
                        tx_id=unhex(parts[1], 32),
                        kind=TxKind(parts[2]),
                        sender=unhex(parts[3], 32),
                        recipient=unhex(parts[4], 32),
                        amount=_parse_int(parts[5]),
                        trigger=unhex(parts[6], 32),
                        parents=parents,
                        timestamp=_parse_int(parts[8]),
                        signature=unhex(parts[9], 64),
                    )
                )
            else:
                raise ValueError("unrecognised record")
    except (ValueError, IndexError) as exc:
        raise errors.ParseError(str(exc), lineno + 1) from None
    if render_export(out.total_supply, out.treasury, out.mode, out.keys, out.transactions) != text:
        raise errors.ParseError("ledger export is not in canonical form")
    return out


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


def replay_balances(transactions: Iterable[TokenTransaction]) -> tuple[dict[bytes, int], dict[bytes, int]]:
    """Fold the log into (address balances, escrow balances). No validation."""
    balances: dict[bytes, int] = {}
    escrow: dict[bytes, int] = {}
    for tx in transactions:
        if tx.kind is TxKind.MINT:
            balances[tx.recipient] = balances.get(tx.recipient, 0) + tx.amount
        elif tx.kind is TxKind.TRANSFER:
            balances[tx.sender] = balances.get(tx.sender, 0) - tx.amount
            balances[tx.recipient] = balances.get(tx.recipient, 0) + tx.amount
        elif tx.kind is TxKind.LOCK:
            balances[tx.sender] = balances.get(tx.sender, 0) - tx.amount
            escrow[tx.recipient] = escrow.get(tx.recipient, 0) + tx.amount
        else:
            escrow[tx.sender] = escrow.get(tx.sender, 0) - tx.amount
            balances[tx.recipient] = balances.get(tx.recipient, 0) + tx.amount
    return balances, escrow


def audit(data: LedgerExport) -> list[str]:
    v: list[str] = []
    keys = data.keys
    for addr, pub in keys.items():
        if address_of(pub) != addr:
            v.append(f"key {hexs(addr)[:12]}: address is not the hash of its public key")
    authority = keys.get(data.treasury)
    if authority is None:
        v.append("treasury has no registered key")
    txs = data.transactions
    if not txs or txs[0].kind is not TxKind.MINT:
        return v + ["missing genesis mint"]

    seen: dict[bytes, int] = {}
    balances: dict[bytes, int] = {}
    escrow_owner: dict[bytes, bytes] = {}
    escrow_bal: dict[bytes, int] = {}
    escrow_orig: dict[bytes, int] = {}
    last_ts = -1
    for i, tx in enumerate(txs):
        tag = f"tx {i} ({hexs(tx.tx_id)[:12]})"
        if tx.compute_id() != tx.tx_id:
            v.append(f"{tag}: hash mismatch")
        if tx.tx_id in seen:
            v.append(f"{tag}: duplicate id")
        if tx.amount <= 0:
            v.append(f"{tag}: non-positive amount")
        if tx.timestamp < last_ts:
            v.append(f"{tag}: timestamp goes backwards")
        last_ts = max(last_ts, tx.timestamp)
        for p in tx.parents:
            if p not in seen:
                v.append(f"{tag}: parent {hexs(p)[:12]} does not precede it")
        if i > 0 and not tx.parents:
            v.append(f"{tag}: missing parents")
        if data.mode == "chain" and i > 0 and tx.parents != (txs[i - 1].tx_id,):
            v.append(f"{tag}: chain-shaped ledger must link to its predecessor")
        seen[tx.tx_id] = i

        signer = authority if tx.kind in (TxKind.MINT, TxKind.RELEASE) else keys.get(tx.sender)
        if signer is None or not verify_signature(signer, encode(tx.body()), tx.signature):
            v.append(f"{tag}: bad signature")

        if tx.kind is TxKind.MINT:
            if i != 0:
                v.append(f"{tag}: mint after genesis")
            if tx.sender != MINT_SOURCE or tx.recipient != data.treasury or tx.trigger != SYSTEM:
                v.append(f"{tag}: malformed genesis")
            if tx.amount != data.total_supply or tx.parents:
                v.append(f"{tag}: genesis does not mint the declared supply")
            balances[tx.recipient] = balances.get(tx.recipient, 0) + tx.amount
        elif tx.kind is TxKind.TRANSFER:
            if tx.sender not in keys or tx.recipient not in keys:
                v.append(f"{tag}: transfer between unknown addresses")
            if tx.trigger == SYSTEM and tx.sender != data.treasury:
                v.append(f"{tag}: system trigger outside treasury grant")
            balances[tx.sender] = balances.get(tx.sender, 0) - tx.amount
            balances[tx.recipient] = balances.get(tx.recipient, 0) + tx.amount
        elif tx.kind is TxKind.LOCK:
            if tx.recipient in keys or tx.recipient in escrow_owner:
                v.append(f"{tag}: escrow id reused or collides with an account")
            escrow_owner[tx.recipient] = tx.sender
            escrow_bal[tx.recipient] = tx.amount
            escrow_orig[tx.recipient] = tx.amount
            balances[tx.sender] = balances.get(tx.sender, 0) - tx.amount
        else:
            if tx.sender not in escrow_owner:
                v.append(f"{tag}: release from unknown escrow")
            if tx.recipient not in keys:
                v.append(f"{tag}: release to unknown address")
            escrow_bal[tx.sender] = escrow_bal.get(tx.sender, 0) - tx.amount
            balances[tx.recipient] = balances.get(tx.recipient, 0) + tx.amount
        for addr in (tx.sender, tx.recipient):
            if balances.get(addr, 0) < 0 or escrow_bal.get(addr, 0) < 0:
                v.append(f"{tag}: negative balance at {hexs(addr)[:12]}")

    for eid, bal in escrow_bal.items():
        if bal not in (0, escrow_orig.get(eid, 0)):
            v.append(f"escrow {hexs(eid)[:12]}: partially released ({bal} left)")
    total = sum(balances.values()) + sum(escrow_bal.values())
    if total != data.total_supply:
        v.append(f"conservation violated: {total} != {data.total_supply}")
    return v


def verify_ledger(ledger: Ledger) -> Report:
    """Re-derive every id, signature and balance from the log and compare with
    the live state."""
    data = LedgerExport(
        ledger.total_supply,
        ledger.treasury,
        "chain" if ledger.chain_shaped else "dag",
        dict(ledger.keys),
        list(ledger.transactions),
    )
    v = audit(data)
    balances, escrow_bal = replay_balances(ledger.transactions)
    for addr in ledger.keys:
        live = ledger.balance_of(addr)
        held = sum(
            escrow_bal.get(e.escrow_id, 0) for e in ledger.escrows.values() if e.owner == addr
        )
        if live != (balances.get(addr, 0), held):
            v.append(f"live balance of {hexs(addr)[:12]} {live} != replay {(balances.get(addr, 0), held)}")
    for e in ledger.escrows.values():
        expect_held = escrow_bal.get(e.escrow_id, 0) > 0
        if expect_held != (e.state is EscrowState.HELD):
            v.append(f"escrow {hexs(e.escrow_id)[:12]} state {e.state.value} disagrees with log")
    return Report(tuple(v))


def verify_export_text(text: str) -> Report:
    try:
        data = parse_export(text)
    except errors.ParseError as exc:
        return Report((f"parse error: {exc}",))
    return Report(tuple(audit(data)))


def load_balances(text: str) -> tuple[LedgerExport, dict[bytes, tuple[int, int]]]:
    """Parse an export and return per-account (spendable, escrowed)."""
    data = parse_export(text)
    balances, escrow_bal = replay_balances(data.transactions)
    owner = {tx.recipient: tx.sender for tx in data.transactions if tx.kind is TxKind.LOCK}
    held: dict[bytes, int] = {}
    for eid, bal in escrow_bal.items():
        held[owner[eid]] = held.get(owner[eid], 0) + bal
    return data, {a: (balances.get(a, 0), held.get(a, 0)) for a in data.keys}
