"""meshanon.types.ring - Ring directory, signatures and key-exchange messages."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from meshanon.types.group import DomainError

if TYPE_CHECKING:
    from meshanon.types.group import GroupParams
    from meshanon.types.trapdoor import Preimage, TrapdoorPublic


class RingAuthError(Exception):
    """An error occurred in the ring signature or key exchange."""


class MalformedSignatureError(RingAuthError, DomainError):
    """A ring signature violates its structural invariants."""


class SigningError(RingAuthError):
    """The signer exhausted its retry budget."""


@dataclass(frozen=True)
class RingMember:
    """A ring member: a stable identifier and its trapdoor public key."""

    member_id: bytes
    public: TrapdoorPublic


@dataclass(frozen=True)
class RingDirectory:
    """An ordered list of ring members with unique identifiers.

    Group validity is checked by meshanon.ringauth.make_directory, which is
    the supported way to build a directory from untrusted key material.
    """

    members: tuple[RingMember, ...]

    def __post_init__(self: RingDirectory) -> None:
        """Check size and identifier uniqueness."""
        if not self.members:
            msg = "a ring needs at least one member"
            raise DomainError(msg)
        ids = [member.member_id for member in self.members]
        if len(set(ids)) != len(ids):
            msg = "ring member identifiers must be unique"
            raise DomainError(msg)

    def __len__(self: RingDirectory) -> int:
        """Return the ring size n."""
        return len(self.members)

    @property
    def member_ids(self: RingDirectory) -> tuple[bytes, ...]:
        """Identifiers in ring order."""
        return tuple(member.member_id for member in self.members)

    def lookup(self: RingDirectory, member_id: bytes) -> RingMember:
        """Return the member with the given identifier."""
        for member in self.members:
            if member.member_id == member_id:
                return member
        msg = f"unknown ring member {member_id!r}"
        raise MalformedSignatureError(msg)


@dataclass(frozen=True)
class ServerPublic:
    """The authentication server's published values (y_B, p, q, g)."""

    group: GroupParams
    y_b: int


@dataclass(frozen=True, repr=False)
class ServerKeys:
    """The authentication server's key pair."""

    group: GroupParams
    x_b: int
    y_b: int

    @property
    def public(self: ServerKeys) -> ServerPublic:
        """Return the public half."""
        return ServerPublic(self.group, self.y_b)

    def __repr__(self: ServerKeys) -> str:
        """Keep x_B out of logs and tracebacks."""
        return f"ServerKeys(group={self.group!r}, x_b=<redacted>, y_b={self.y_b})"


@dataclass(frozen=True)
class RingSignature:
    """The ring signature sigma = (members, v, V, R, (alpha_t, beta_t)...)."""

    member_ids: tuple[bytes, ...]
    v: int
    big_v: int
    big_r: int
    pairs: tuple[Preimage, ...]

    def __post_init__(self: RingSignature) -> None:
        """Check that the ring is non-empty with one preimage per member."""
        if not self.member_ids:
            msg = "signature names no ring members"
            raise MalformedSignatureError(msg)
        if len(self.pairs) != len(self.member_ids):
            msg = "signature needs one preimage per ring member"
            raise MalformedSignatureError(msg)


@dataclass(frozen=True, repr=False)
class ClientSession:
    """Client-side state kept between Round 1 and Round 3."""

    server: ServerPublic
    x_i: int
    x_a: int
    big_x: int
    big_r: int
    big_q: int
    big_v: int
    l_digest: bytes
    identity: bytes

    def __repr__(self: ClientSession) -> str:
        """Keep the ephemeral exponents out of logs and tracebacks."""
        return f"ClientSession(X={self.big_x}, identity={self.identity!r})"


@dataclass(frozen=True)
class ServerResponse:
    """Round 2 reply {h, Y, I'}."""

    h: bytes
    big_y: int
    i_prime: bytes


@dataclass(frozen=True)
class ServerAccept:
    """The server accepted the signature and derived a session key."""

    response: ServerResponse
    session_key: int


@dataclass(frozen=True)
class ClientAccept:
    """The client confirmed the server and derived the same session key."""

    session_key: int


@dataclass(frozen=True)
class Reject:
    """A protocol rejection, carried as a value."""

    reason: str
