import os
import sys
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from porledger.contracts import ContractKind  # noqa: E402
from porledger.ecosystem import Ecosystem  # noqa: E402
from porledger.identity import Profile  # noqa: E402
from porledger.policy import PolicyConfig  # noqa: E402

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


class World:
    """An ecosystem plus name-keyed helpers for compact tests."""

    def __init__(self, policy=None, seed=1):
        self.eco = Ecosystem(policy or PolicyConfig(), seed)
        self.u = {}

    def user(self, name, keywords=(), optin=False, display_name="", **kw):
        profile = Profile(display_name, frozenset(keywords), reviewer_opt_in=optin, **kw)
        self.u[name] = self.eco.create_user(profile, name=name).address
        return self.u[name]

    def authorship(self, names, shares=None, stake=None, sign=True):
        parties = [self.u[n] for n in names]
        sh = None if shares is None else list(zip(parties, map(Fraction, shares)))
        c = self.eco.propose_contract(ContractKind.AUTHORSHIP, parties, sh, stake)
        if sign:
            for p in parties:
                c = self.eco.sign_contract(c.id, p)
        return c

    def submit(self, names, cites=None, shares=None, stake=None, keywords=("ledgers",), content="body"):
        c = self.authorship(names, shares, stake)
        cites = cites if cites is not None else [self.eco.genesis.id]
        return self.eco.submit(c.id, content, cites, keywords)

    def review_contract(self, origin, name, stake=None, sign=True):
        c = self.eco.propose_contract(ContractKind.REVIEW, [self.u[name]], stake=stake, target=origin)
        if sign:
            c = self.eco.sign_contract(c.id, self.u[name])
        return c

    def confirm(self, origin, names, verdict="confirm"):
        for n in names:
            if self.eco.graph.node(origin).state.value != "under-review":
                break
            self.review_contract(origin, n)
            self.eco.review(origin, self.u[n], verdict, f"report by {n}")
            self.eco.try_confirm(origin)
        return self.eco.graph.node(origin)

    def bal(self, name):
        addr = self.eco.treasury if name == "T" else self.u[name]
        return self.eco.ledger.balance_of(addr)


@pytest.fixture
def world():
    return World()


@pytest.fixture
def make_world():
    return World


# -- acceptance summary ---------------------------------------------------

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
