"""meshanon.types.trapdoor - Per-user trapdoor key material."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from meshanon.types.group import DomainError

if TYPE_CHECKING:
    from meshanon.types.group import GroupParams


class TrapdoorError(DomainError):
    """A trapdoor evaluation or inversion received an out-of-range argument."""


@dataclass(frozen=True)
class TrapdoorPublic:
    """Public half of a trapdoor key: the group (p_i, q_i, g_i) and y_A."""

    group: GroupParams
    y_a: int


@dataclass(frozen=True, repr=False)
class TrapdoorPrivate:
    """Private half of a trapdoor key."""

    x_a: int

    def __repr__(self: TrapdoorPrivate) -> str:
        """Keep the exponent out of logs and tracebacks."""
        return "TrapdoorPrivate(x_a=<redacted>)"


@dataclass(frozen=True)
class TrapdoorKeyPair:
    """A public/private trapdoor key pair."""

    public: TrapdoorPublic
    private: TrapdoorPrivate


@dataclass(frozen=True)
class Preimage:
    """A preimage (alpha, beta) of the trapdoor function."""

    alpha: int
    beta: int

    def __post_init__(self: Preimage) -> None:
        """Reject the zero alpha, which has no image."""
        if self.alpha == 0:
            msg = "alpha must be non-zero"
            raise TrapdoorError(msg)
