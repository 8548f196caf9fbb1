"""User pool: keypair-backed accounts, research profiles and gift grants."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from porledger import errors
from porledger.canonical import encode, hexs
from porledger.crypto import KeyPair, verify_signature
from porledger.ledger import SYSTEM, Ledger, TxKind
from porledger.rng import SeedStream

GIFT_BASE = 100
GIFT_PER_ATTRIBUTE = 10
GIFT_CAP = 150

__all__ = [
    "IdentityPool",
    "Profile",
    "Role",
    "UserAccount",
    "gift_amount",
    "parse_profile_record",
    "verify_signature",
]


class Role(str, enum.Enum):
    AUTHOR = "author"
    REVIEWER = "reviewer"
    FUNDER = "funder"
    PUBLISHER = "publisher"
    SERVICE_PROVIDER = "service-provider"


_ORCID = re.compile(r"^\d{4}-\d{4}-\d{4}-\d{3}[\dX]$")


def orcid_checksum_ok(orcid: str) -> bool:
    """ISO 7064 MOD 11-2 check digit used by ORCID identifiers."""
    if not _ORCID.match(orcid):
        return False
    digits = orcid.replace("-", "")
    total = 0
    for ch in digits[:-1]:
        total = (total + int(ch)) * 2
    check = (12 - total % 11) % 11
    return digits[-1] == ("X" if check == 10 else str(check))


def _validate_scholar_id(kind: str, value: str) -> None:
    # format checks only; nothing is resolved against external registries
    if not kind or not value or any(c.isspace() for c in kind + value):
        raise errors.InvalidProfile(f"scholar id {kind}:{value!r} is empty or contains whitespace")
    if kind == "orcid" and not orcid_checksum_ok(value):
        raise errors.InvalidProfile(f"malformed ORCID {value!r}")


@dataclass(frozen=True)
class Profile:
    display_name: str = ""
    keywords: frozenset[str] = frozenset()
    scholar_ids: tuple[tuple[str, str], ...] = ()
    roles: frozenset[Role] = frozenset()
    reviewer_opt_in: bool = False

    def __post_init__(self):
        kws = frozenset(k.strip().lower() for k in self.keywords if k.strip())
        object.__setattr__(self, "keywords", kws)
        ids = dict(self.scholar_ids.items() if isinstance(self.scholar_ids, Mapping) else self.scholar_ids)
        for kind, value in ids.items():
            _validate_scholar_id(kind, value)
        object.__setattr__(self, "scholar_ids", tuple(sorted(ids.items())))
        roles = frozenset(Role(r) for r in self.roles)
        if self.reviewer_opt_in:
            roles |= {Role.REVIEWER}
        object.__setattr__(self, "roles", roles)

    def attribute_count(self) -> int:
        return sum(bool(x) for x in (self.keywords, self.scholar_ids, self.display_name.strip()))

    def to_record(self) -> dict:
        return {
            "display_name": self.display_name,
            "keywords": sorted(self.keywords),
            "scholar_ids": [list(p) for p in self.scholar_ids],
            "roles": sorted(r.value for r in self.roles),
            "reviewer_opt_in": self.reviewer_opt_in,
        }


def gift_amount(profile: Profile) -> int:
    return min(GIFT_BASE + GIFT_PER_ATTRIBUTE * profile.attribute_count(), GIFT_CAP)


def parse_profile_record(fields: Iterable[str]) -> Profile:
    """Build a profile from ``key=value`` tokens.

    Recognised keys: ``name``, ``keywords`` (comma list), ``ids`` (comma list of
    ``kind:value``), ``roles`` (comma list) and ``optin`` (bare flag or
    ``optin=yes|no``).
    """
    kw: dict = {}
    for token in fields:
        key, sep, value = token.partition("=")
        if key == "optin":
            if sep and value not in ("yes", "no"):
                raise errors.InvalidProfile(f"optin must be yes|no, got {value!r}")
            kw["reviewer_opt_in"] = not sep or value == "yes"
        elif not sep:
            raise errors.InvalidProfile(f"expected key=value, got {token!r}")
        elif key == "name":
            kw["display_name"] = value
        elif key == "keywords":
            kw["keywords"] = frozenset(v for v in value.split(",") if v)
        elif key == "ids":
            pairs = []
            for item in filter(None, value.split(",")):
                kind, colon, ident = item.partition(":")
                if not colon:
                    raise errors.InvalidProfile(f"scholar id needs kind:value, got {item!r}")
                pairs.append((kind.lower(), ident))
            kw["scholar_ids"] = tuple(pairs)
        elif key == "roles":
            try:
                kw["roles"] = frozenset(Role(r) for r in value.split(",") if r)
            except ValueError as exc:
                raise errors.InvalidProfile(str(exc)) from None
        else:
            raise errors.InvalidProfile(f"unknown profile field {key!r}")
    return Profile(**kw)


@dataclass(frozen=True)
class UserAccount:
    address: bytes
    keypair: KeyPair = field(repr=False)
    profile: Profile
    created_at: int
    reviews_completed: int = 0
    name: str = ""

    def __deepcopy__(self, memo):
        return self  # immutable value


def profile_message(address: bytes, profile: Profile) -> bytes:
    return encode({"update-profile": address, "profile": profile.to_record()})


class IdentityPool:
    def __init__(self, ledger: Ledger, treasury_keys: KeyPair, stream: SeedStream):
        if treasury_keys.address != ledger.treasury:
            raise ValueError("treasury keys do not match the ledger treasury")
        self.ledger = ledger
        self._treasury = treasury_keys
        self._stream = stream
        self.accounts: dict[bytes, UserAccount] = {}

    def create_account(self, profile: Profile, name: str = "") -> UserAccount:
        keys = KeyPair.from_seed(self._stream.peek("keypair"))
        if keys.address in self.accounts or self.ledger.is_known(keys.address):
            raise errors.InvalidProfile("address collision")
        grant = gift_amount(profile)
        spendable, _ = self.ledger.balance_of(self.ledger.treasury)
        if spendable < grant:
            raise errors.InsufficientFunds("treasury cannot cover the gift grant")
        self._stream.draw("keypair")
        self.ledger.register(keys.public_key)
        payload = self.ledger.payload_for(TxKind.TRANSFER, self.ledger.treasury, keys.address, grant, SYSTEM)
        self.ledger.transfer(self.ledger.treasury, keys.address, grant, SYSTEM, self._treasury.sign(payload))
        account = UserAccount(keys.address, keys, profile, self.ledger.clock.tick, name=name)
        self.accounts[keys.address] = account
        return account

    def get(self, address: bytes) -> UserAccount:
        try:
            return self.accounts[address]
        except KeyError:
            raise errors.UnknownAddress(hexs(address)) from None

    def update_profile(self, address: bytes, new_profile: Profile, sig: bytes) -> UserAccount:
        account = self.get(address)
        if not verify_signature(account.keypair.public_key, profile_message(address, new_profile), sig):
            raise errors.BadSignature("profile update not signed by the account holder")
        account = replace(account, profile=new_profile)
        self.accounts[address] = account
        return account

    def note_review_completed(self, address: bytes) -> None:
        account = self.get(address)
        self.accounts[address] = replace(account, reviews_completed=account.reviews_completed + 1)
