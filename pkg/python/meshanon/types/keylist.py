"""meshanon.types.keylist - Key lists, their handles and request scheduling."""

from __future__ import annotations

from dataclasses import dataclass


class KeyManagementError(Exception):
    """An error occurred while handling a key list."""


class ClockSkewError(KeyManagementError):
    """The local clock is earlier than the key list timestamp."""


class SessionExpiredError(KeyManagementError):
    """Every key in the list has timed out."""


@dataclass(frozen=True, repr=False)
class KeyList:
    """An AS-issued ordered list of symmetric keys.

    Exactly one key is active per timeout window, starting at ts_kl.
    """

    keys: tuple[bytes, ...]
    ts_kl: float
    """Generation timestamp (ms)."""
    timeout: float
    """Validity of each key (ms)."""
    session: int = 0
    """AS session counter the list was generated for."""

    def __post_init__(self: KeyList) -> None:
        """Check cardinality and timeout."""
        if not self.keys:
            msg = "a key list holds at least one key"
            raise KeyManagementError(msg)
        if self.timeout <= 0:
            msg = "timeout must be positive"
            raise KeyManagementError(msg)

    @property
    def cardinality(self: KeyList) -> int:
        """Number of keys in the list."""
        return len(self.keys)

    @property
    def session_length(self: KeyList) -> float:
        """Time over which the list is valid (ms)."""
        return self.cardinality * self.timeout

    @property
    def expires_at(self: KeyList) -> float:
        """First instant at which no key of the list is valid."""
        return self.ts_kl + self.session_length

    def __repr__(self: KeyList) -> str:
        """Keep key material out of logs and tracebacks."""
        return (
            f"KeyList(session={self.session}, ts_kl={self.ts_kl}, "
            f"timeout={self.timeout}, cardinality={self.cardinality})"
        )


@dataclass
class SchedulerState:
    """Request timing of one node, updated by its own event handler only."""

    t_s: float | None = None
    """Send time of the last request."""
    t_r: float | None = None
    """Receive time of the last response."""
    c: int = 0
    """Current correction factor."""

    @property
    def t_last(self: SchedulerState) -> float | None:
        """Duration of the last request/response round."""
        if self.t_s is None or self.t_r is None:
            return None
        return self.t_r - self.t_s


@dataclass(frozen=True)
class KeyHandle:
    """The index of the active key and its remaining validity."""

    key_idx: int
    remaining: float
    """T_i, remaining validity (ms)."""
