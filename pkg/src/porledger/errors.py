"""Exception hierarchy. Every protocol rejection carries a stable ``category``
string (the class name) so the CLI can emit it on stderr."""


class ProtocolError(Exception):
    @property
    def category(self) -> str:
        return type(self).__name__


# ledger
class ZeroSupply(ProtocolError): ...
class ZeroStake(ProtocolError): ...
class ZeroAmount(ProtocolError): ...
class InsufficientFunds(ProtocolError): ...
class BadSignature(ProtocolError): ...
class UnknownAddress(ProtocolError): ...
class UnknownEscrow(ProtocolError): ...
class PayoutMismatch(ProtocolError): ...
class AlreadyTerminal(ProtocolError): ...

# identity
class InvalidProfile(ProtocolError): ...

# publication graph
class MalformedComponent(ProtocolError): ...
class GenesisExists(ProtocolError): ...
class UnconfirmedCitation(ProtocolError): ...
class SharesDontSumToOne(ProtocolError): ...
class MissingSignature(ProtocolError): ...
class LockedManuscript(ProtocolError): ...
class NotUnderReview(ProtocolError): ...
class NoReviewContract(ProtocolError): ...
class ReviewerIsAuthor(ProtocolError): ...
class UnknownManuscript(ProtocolError): ...
class NoCitations(ProtocolError): ...

# contracts
class InvalidShares(ProtocolError): ...
class UnknownParty(ProtocolError): ...
class NotAParty(ProtocolError): ...
class AlreadyActive(ProtocolError): ...
class AlreadyLocked(ProtocolError): ...
class StateMismatch(ProtocolError): ...
class ContractInUse(StateMismatch): ...
class UnknownContract(ProtocolError): ...

# consensus
class InvalidPolicy(ProtocolError): ...
class EmptyPool(ProtocolError): ...
class NotConfirmed(ProtocolError): ...

# artifacts / cli
class UnknownFormat(ProtocolError): ...


class ParseError(ProtocolError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ScenarioError(ProtocolError):
    """A step failed; wraps the module error with the failing step index."""

    def __init__(self, step: int, line: int, cause: ProtocolError):
        self.step = step
        self.line = line
        self.cause = cause
        super().__init__(f"step {step} (line {line}): {cause.category}: {cause}")

    @property
    def category(self) -> str:
        return self.cause.category
