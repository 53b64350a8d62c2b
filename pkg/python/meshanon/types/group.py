"""meshanon.types.group - Prime-order subgroup parameters."""

from __future__ import annotations

from dataclasses import dataclass


class GroupMathError(Exception):
    """An error occurred in modular arithmetic or group handling."""


class DomainError(GroupMathError, ValueError):
    """An argument is outside the domain of the operation."""


class GroupGenerationError(GroupMathError):
    """Group parameter search failed within its attempt budget."""


class EncodingError(GroupMathError, ValueError):
    """A byte string is not a valid canonical encoding."""


@dataclass(frozen=True)
class GroupParams:
    """A Schnorr-style group: g generates the order-q subgroup of Z_p^*."""

    p: int
    """Prime modulus."""
    q: int
    """Prime order of the subgroup, q | p - 1."""
    g: int
    """Generator of the order-q subgroup."""

    @property
    def p_bytes(self: GroupParams) -> int:
        """Byte width of the modulus."""
        return (self.p.bit_length() + 7) // 8

    @property
    def q_bytes(self: GroupParams) -> int:
        """Byte width of the subgroup order."""
        return (self.q.bit_length() + 7) // 8
