"""Counter-based deterministic randomness derived from one scenario seed."""

from __future__ import annotations

from porledger.canonical import digest


class SeedStream:
    """Each draw hashes (seed, counter, label); no ambient entropy anywhere."""

    def __init__(self, seed: int):
        if seed < 0 or seed >= 2**64:
            raise ValueError("seed must be a u64")
        self.seed = seed
        self.counter = 0

    def peek(self, label: str) -> bytes:
        """The value the next ``draw(label)`` will return, without advancing."""
        return digest({"seed": self.seed, "counter": self.counter, "label": label})

    def draw(self, label: str) -> bytes:
        out = self.peek(label)
        self.counter += 1
        return out
