"""Ecosystem policy: every knob the protocol leaves to governance."""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields, replace
from fractions import Fraction

from porledger import errors
from porledger.ledger import DEFAULT_SUPPLY


class SelfCitationRule(str, enum.Enum):
    ALLOW = "allow"
    REDIRECT_AUTHORS_TO_TREASURY = "redirect-authors-to-treasury"


@dataclass(frozen=True)
class PolicyConfig:
    K: int = 2
    author_stake: int = 100
    reviewer_stake: int = 10
    alpha: Fraction = Fraction(1, 2)
    beta: Fraction = Fraction(3, 10)
    gamma: Fraction = Fraction(1, 5)
    rho_refund: Fraction = Fraction(1, 2)
    self_citation_rule: SelfCitationRule = SelfCitationRule.ALLOW
    candidate_count: int = 5
    total_supply: int = DEFAULT_SUPPLY

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "rho_refund"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))
        object.__setattr__(self, "self_citation_rule", SelfCitationRule(self.self_citation_rule))
        if self.K < 1:
            raise errors.InvalidPolicy("K must be at least 1")
        if min(self.alpha, self.beta, self.gamma) < 0 or self.alpha + self.beta + self.gamma != 1:
            raise errors.InvalidPolicy("alpha + beta + gamma must equal 1 exactly")
        if not 0 <= self.rho_refund <= 1:
            raise errors.InvalidPolicy("rho_refund must lie in [0, 1]")
        if self.author_stake <= 0 or self.reviewer_stake <= 0:
            raise errors.InvalidPolicy("stakes must be positive")
        if self.candidate_count < 1 or self.total_supply <= 0:
            raise errors.InvalidPolicy("candidate_count and total_supply must be positive")

    @property
    def split(self) -> tuple[Fraction, Fraction, Fraction]:
        return self.alpha, self.beta, self.gamma

    def to_lines(self) -> list[str]:
        """``key=value`` lines in field order; round-trips through :func:`parse_policy`."""
        out = []
        for f in fields(self):
            value = getattr(self, f.name)
            out.append(f"{f.name}={value.value if isinstance(value, enum.Enum) else value}")
        return out

    def with_overrides(self, pairs: dict[str, str]) -> "PolicyConfig":
        return replace(self, **_coerce(pairs))


_INT_FIELDS = {"K", "author_stake", "reviewer_stake", "candidate_count", "total_supply"}
_FRACTION_FIELDS = {"alpha", "beta", "gamma", "rho_refund"}


def _coerce(pairs: dict[str, str]) -> dict:
    out: dict = {}
    for key, raw in pairs.items():
        try:
            if key in _INT_FIELDS:
                out[key] = int(raw)
            elif key in _FRACTION_FIELDS:
                out[key] = Fraction(raw)
            elif key == "self_citation_rule":
                out[key] = SelfCitationRule(raw)
            else:
                raise errors.InvalidPolicy(f"unknown policy key {key!r}")
        except ValueError as exc:
            raise errors.InvalidPolicy(f"{key}: {exc}") from None
    return out


def parse_policy(text: str, base: PolicyConfig | None = None) -> PolicyConfig:
    """Flat ``key=value`` file, ``#`` comments and blank lines ignored."""
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise errors.ParseError(f"expected key=value, got {line!r}", lineno)
        pairs[key.strip()] = value.strip()
    return (base or PolicyConfig()).with_overrides(pairs)
