"""meshanon.util - Seeded randomness and small helpers shared across meshanon."""

from __future__ import annotations

import hashlib
_BLOCK = 64


def normalize_seed(seed: bytes | str | int) -> bytes:
    """Normalize a user supplied seed to bytes."""
    if isinstance(seed, bytes):
        return seed
    if isinstance(seed, int):
        if seed < 0:
            msg = "seed must be non-negative"
            raise ValueError(msg)
        return seed.to_bytes(max(1, (seed.bit_length() + 7) // 8), "big")
    return seed.encode()


def derive_seed(seed: bytes, *labels: bytes | str | int) -> bytes:
    """Derive a child seed from a parent seed and a sequence of labels."""
    digest = hashlib.sha256()
    digest.update(len(seed).to_bytes(4, "big"))
    digest.update(seed)
    for label in labels:
        raw = normalize_seed(label)
        digest.update(len(raw).to_bytes(4, "big"))
        digest.update(raw)
    return digest.digest()


class DeterministicStream:
    """A deterministic byte stream expanded from a seed with SHAKE-256.

    Every draw consumes bytes from the stream, so two streams built from the
    same seed and label produce the same sequence of values.
    """

    _seed: bytes
    _counter: int
    _buffer: bytes

    def __init__(self: DeterministicStream, seed: bytes, label: bytes = b"") -> None:
        """Create a DeterministicStream."""
        self._seed = derive_seed(seed, label)
        self._counter = 0
        self._buffer = b""

    def read(self: DeterministicStream, n: int) -> bytes:
        """Return the next n bytes of the stream."""
        while len(self._buffer) < n:
            block = hashlib.shake_256(
                self._seed + self._counter.to_bytes(8, "big")
            ).digest(_BLOCK)
            self._counter += 1
            self._buffer += block
        out, self._buffer = self._buffer[:n], self._buffer[n:]
        return out

    def randbits(self: DeterministicStream, k: int) -> int:
        """Return a uniform integer with k random bits."""
        if k <= 0:
            return 0
        raw = int.from_bytes(self.read((k + 7) // 8), "big")
        return raw >> ((8 - k % 8) % 8)

    def randbelow(self: DeterministicStream, n: int) -> int:
        """Return a uniform integer in [0, n) by rejection sampling."""
        if n <= 0:
            msg = "upper bound must be positive"
            raise ValueError(msg)
        k = n.bit_length()
        while True:
            value = self.randbits(k)
            if value < n:
                return value

    def randrange(self: DeterministicStream, start: int, stop: int) -> int:
        """Return a uniform integer in [start, stop)."""
        return start + self.randbelow(stop - start)

