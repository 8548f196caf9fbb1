import pytest

from porledger import modelcheck
from porledger.ecosystem import Ecosystem


@pytest.mark.parametrize("k", [1, 2])
def test_bounded_model_is_clean(k):
    result = modelcheck.check(k, n_reviewers=2)
    assert result.ok, result.violations[:5]
    assert result.transitions > 0 and result.rejected > 0
    assert set(result.terminal) == {"confirmed", "withdrawn"}


def test_checker_catches_unstaking_after_voting(monkeypatch):
    # Without the cancellation guard a reviewer can vote and then take the
    # stake back, which the stake-before-voice check must flag.
    monkeypatch.setattr(Ecosystem, "_check_cancellable", lambda self, contract: None)
    result = modelcheck.check(1, n_reviewers=2)
    assert not result.ok
    assert any("has no stake" in v for v in result.violations)


def test_abstraction_ignores_identities():
    a = modelcheck.build_world(1, 2, seed=0)
    b = modelcheck.build_world(1, 2, seed=1)
    assert modelcheck.abstract(a) == modelcheck.abstract(b)
