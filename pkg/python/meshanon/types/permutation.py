"""meshanon.types.permutation - Keyed permutations over b-bit blocks."""

from __future__ import annotations

import hashlib
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from meshanon.types.group import DomainError
from meshanon.types.ring import RingAuthError

if TYPE_CHECKING:
    from meshanon.types.ring import RingDirectory


class CombiningWidthError(RingAuthError, DomainError):
    """A block does not have the configured bit width."""


class KeyedPermutation(ABC):
    """A family E_k of bijections over b-bit blocks, one per key."""

    @abstractmethod
    def forward(self: KeyedPermutation, key: bytes, block: int, bits: int) -> int:
        """Apply E_k to a block."""
        raise NotImplementedError

    @abstractmethod
    def inverse(self: KeyedPermutation, key: bytes, block: int, bits: int) -> int:
        """Apply the inverse of E_k to a block."""
        raise NotImplementedError


class XorPermutation(KeyedPermutation):
    """XorPermutation XORs the block with the key, truncated to b bits.

    Trivially analyzable, so it is the permutation used by hand-computed
    examples. It offers no security.
    """

    def forward(self: XorPermutation, key: bytes, block: int, bits: int) -> int:
        """XOR the block with the key."""
        return block ^ (int.from_bytes(key, "big") & ((1 << bits) - 1))

    def inverse(self: XorPermutation, key: bytes, block: int, bits: int) -> int:
        """XOR is its own inverse."""
        return self.forward(key, block, bits)


class FeistelPermutation(KeyedPermutation):
    """A Feistel network whose round function is SHAKE-256 over the key.

    Odd widths split into unequal halves; the halves swap widths every round,
    so an even round count returns them to their original positions.
    """

    rounds: int

    def __init__(self: FeistelPermutation, rounds: int = 4) -> None:
        """Create a FeistelPermutation."""
        if rounds <= 0 or rounds % 2:
            msg = "round count must be a positive even number"
            raise DomainError(msg)
        self.rounds = rounds

    @staticmethod
    def _round(key: bytes, index: int, half: int, width: int) -> int:
        if width == 0:
            return 0
        material = (
            len(key).to_bytes(4, "big")
            + key
            + index.to_bytes(2, "big")
            + half.to_bytes((width + 7) // 8 + 1, "big")
        )
        raw = hashlib.shake_256(material).digest((width + 7) // 8)
        return int.from_bytes(raw, "big") & ((1 << width) - 1)

    def forward(self: FeistelPermutation, key: bytes, block: int, bits: int) -> int:
        """Encrypt one block."""
        left_bits = bits // 2
        right_bits = bits - left_bits
        left = block >> right_bits
        right = block & ((1 << right_bits) - 1)
        for index in range(self.rounds):
            left, right = right, left ^ self._round(key, index, right, left_bits)
            left_bits, right_bits = right_bits, left_bits
        return (left << right_bits) | right

    def inverse(self: FeistelPermutation, key: bytes, block: int, bits: int) -> int:
        """Decrypt one block."""
        left_bits = bits // 2
        right_bits = bits - left_bits
        left = block >> right_bits
        right = block & ((1 << right_bits) - 1)
        for index in reversed(range(self.rounds)):
            left_bits, right_bits = right_bits, left_bits
            left, right = right ^ self._round(key, index, left, left_bits), left
        return (left << right_bits) | right


@dataclass(frozen=True)
class CombiningConfig:
    """Block width b and keyed permutation E of the combining function."""

    bits: int
    permutation: KeyedPermutation = field(default_factory=FeistelPermutation)

    def __post_init__(self: CombiningConfig) -> None:
        """Reject empty blocks."""
        if self.bits <= 0:
            msg = "block width must be positive"
            raise DomainError(msg)

    @property
    def block_bytes(self: CombiningConfig) -> int:
        """Number of bytes used to carry one block on the wire."""
        return (self.bits + 7) // 8

    def check_block(self: CombiningConfig, block: int) -> None:
        """Raise CombiningWidthError unless block fits in b bits."""
        if not 0 <= block < (1 << self.bits):
            msg = f"block {block} does not fit in {self.bits} bits"
            raise CombiningWidthError(msg)

    def check_ring(self: CombiningConfig, directory: RingDirectory) -> None:
        """Raise DomainError unless every member modulus fits in b bits."""
        widest = max(member.public.group.p for member in directory.members)
        if widest >= (1 << self.bits):
            msg = f"block width {self.bits} cannot embed modulus {widest}"
            raise DomainError(msg)

    @classmethod
    def for_ring(
        cls: type[CombiningConfig],
        directory: RingDirectory,
        permutation: KeyedPermutation | None = None,
    ) -> CombiningConfig:
        """Pick b as the widest member modulus bit length."""
        bits = max(member.public.group.p.bit_length() for member in directory.members)
        if permutation is None:
            return cls(bits)
        return cls(bits, permutation)
