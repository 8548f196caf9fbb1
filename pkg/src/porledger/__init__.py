"""Deterministic peer-review ledger: token escrow, publication graph, contracts
and Proof-of-Review confirmation with citation settlement."""

from porledger.canonical import encode, hash_bytes
from porledger.consensus import (
    BeneficiaryClass,
    SettlementLine,
    SettlementReport,
    distribution_for_citation,
    select_reviewers,
    tally_confirmations,
)
from porledger.contracts import Contract, ContractKind, ContractState, execute_trigger
from porledger.ecosystem import Ecosystem
from porledger.errors import ProtocolError
from porledger.graph import ManuscriptNode, PublicationGraph, merkle_root
from porledger.identity import Profile, UserAccount
from porledger.ledger import Ledger, init_ledger, verify_ledger
from porledger.policy import PolicyConfig, SelfCitationRule
from porledger.scenario import run_scenario

__all__ = [
    "BeneficiaryClass",
    "Contract",
    "ContractKind",
    "ContractState",
    "Ecosystem",
    "Ledger",
    "ManuscriptNode",
    "PolicyConfig",
    "Profile",
    "ProtocolError",
    "PublicationGraph",
    "SelfCitationRule",
    "SettlementLine",
    "SettlementReport",
    "UserAccount",
    "distribution_for_citation",
    "encode",
    "execute_trigger",
    "hash_bytes",
    "init_ledger",
    "merkle_root",
    "run_scenario",
    "select_reviewers",
    "tally_confirmations",
    "verify_ledger",
]
