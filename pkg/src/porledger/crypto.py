"""Ed25519 keypairs. Signing is deterministic given (key, message), which the
replay-determinism contract depends on."""

from __future__ import annotations

from dataclasses import dataclass, field

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from porledger.canonical import hash_bytes


@dataclass(frozen=True)
class KeyPair:
    public_key: bytes
    _signing_key: Ed25519PrivateKey = field(repr=False, compare=False)

    @classmethod
    def from_seed(cls, seed: bytes) -> "KeyPair":
        if len(seed) != 32:
            raise ValueError("keypair seed must be 32 bytes")
        sk = Ed25519PrivateKey.from_private_bytes(seed)
        pk = sk.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
        return cls(pk, sk)

    @property
    def address(self) -> bytes:
        return address_of(self.public_key)

    def sign(self, message: bytes) -> bytes:
        return self._signing_key.sign(message)

    def __deepcopy__(self, memo):
        # key material is immutable; share it across state copies
        return self


def address_of(public_key: bytes) -> bytes:
    return hash_bytes(b"addr" + public_key)


def verify_signature(public_key: bytes, message: bytes, sig: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(sig, message)
    except (InvalidSignature, ValueError):
        return False
    return True
