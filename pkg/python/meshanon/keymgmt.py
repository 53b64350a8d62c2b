"""meshanon.keymgmt - Key-list distribution and key-index scheduling."""

from __future__ import annotations

import logging
import math
from typing import TYPE_CHECKING

from meshanon.types.keylist import (
    ClockSkewError,
    KeyHandle,
    KeyList,
    KeyManagementError,
    SchedulerState,
    SessionExpiredError,
)
from meshanon.util import derive_seed

if TYPE_CHECKING:
    from collections.abc import Iterator

log = logging.getLogger(__name__)

KEY_BYTES = 32


def _elapsed(t_now: float, ts_kl: float, timeout: float) -> tuple[int, float]:
    if timeout <= 0:
        msg = "timeout must be positive"
        raise KeyManagementError(msg)
    if t_now < ts_kl:
        msg = f"clock at {t_now} is before the key list timestamp {ts_kl}"
        raise ClockSkewError(msg)
    windows, into_window = divmod(t_now - ts_kl, timeout)
    return int(windows), into_window


def current_key_index(t_now: float, ts_kl: float, timeout: float) -> int:
    """Return the 1-based index of the key in use at t_now.

    Windows are half-open, so at an exact multiple of timeout the next key is
    already in effect.
    """
    windows, _ = _elapsed(t_now, ts_kl, timeout)
    return windows + 1


def remaining_validity(t_now: float, ts_kl: float, timeout: float) -> float:
    """Return how long the key in use at t_now stays valid, in (0, timeout]."""
    _, into_window = _elapsed(t_now, ts_kl, timeout)
    return timeout - into_window


def correction_factor(t_last: float, timeout: float) -> int:
    """Return how many windows early the next list must be requested."""
    if timeout <= 0 or t_last < 0:
        msg = "need t_last >= 0 and timeout > 0"
        raise KeyManagementError(msg)
    if t_last < timeout:
        return 0
    return math.ceil((t_last - timeout) / timeout)


def request_trigger_index(cardinality: int, c: int) -> int:
    """Return the key index at which the next list is requested."""
    if cardinality < 1:
        msg = "cardinality must be >= 1"
        raise KeyManagementError(msg)
    return max(1, cardinality - c)


def generate_key_list(
    session: int,
    session_start: float,
    cardinality: int,
    timeout: float,
    seed: bytes,
) -> KeyList:
    """Derive the keys of one session from the master seed.

    Every key is bound to the session counter and its index, so no two
    sessions share a key.
    """
    if cardinality < 1:
        msg = "cardinality must be >= 1"
        raise KeyManagementError(msg)
    keys = tuple(
        derive_seed(seed, b"key-list", session, index) for index in range(cardinality)
    )
    return KeyList(keys, session_start, timeout, session)


def lookup_key(key_list: KeyList, t_now: float) -> tuple[bytes, KeyHandle]:
    """Return the key in use at t_now together with its handle."""
    index = current_key_index(t_now, key_list.ts_kl, key_list.timeout)
    if index > key_list.cardinality:
        msg = f"key list of session {key_list.session} expired at {key_list.expires_at}"
        raise SessionExpiredError(msg)
    remaining = remaining_validity(t_now, key_list.ts_kl, key_list.timeout)
    return key_list.keys[index - 1], KeyHandle(index, remaining)


class KeyListServer:
    """KeyListServer is the AS side of key-list distribution.

    Session s covers [epoch + s * session_length, epoch + (s + 1) *
    session_length). A node asking for a list receives the one after the last
    list it was sent, or the current one if it fell behind.
    """

    seed: bytes
    cardinality: int
    timeout: float
    epoch: float
    _lists: dict[int, KeyList]
    _delivered: dict[int, int]

    def __init__(
        self: KeyListServer,
        seed: bytes,
        cardinality: int,
        timeout: float,
        epoch: float = 0.0,
    ) -> None:
        """Create a KeyListServer."""
        if cardinality < 1 or timeout <= 0:
            msg = "cardinality must be >= 1 and timeout positive"
            raise KeyManagementError(msg)
        self.seed = seed
        self.cardinality = cardinality
        self.timeout = timeout
        self.epoch = epoch
        self._lists = {}
        self._delivered = {}

    @property
    def session_length(self: KeyListServer) -> float:
        """Validity of one list."""
        return self.cardinality * self.timeout

    def current_session(self: KeyListServer, t_now: float) -> int:
        """Return the session counter in effect at t_now."""
        if t_now < self.epoch:
            msg = f"clock at {t_now} is before the epoch {self.epoch}"
            raise ClockSkewError(msg)
        return int((t_now - self.epoch) // self.session_length)

    def session_start(self: KeyListServer, session: int) -> float:
        """Return TS_KL of a session."""
        return self.epoch + session * self.session_length

    def list_for_session(self: KeyListServer, session: int) -> KeyList:
        """Return the key list of a session, generating it on first use."""
        if session < 0:
            msg = "session counters start at 0"
            raise KeyManagementError(msg)
        if session not in self._lists:
            self._lists[session] = generate_key_list(
                session,
                self.session_start(session),
                self.cardinality,
                self.timeout,
                self.seed,
            )
        return self._lists[session]

    def respond(self: KeyListServer, node_id: int, t_now: float) -> KeyList:
        """Answer a key-list request from node_id received at t_now."""
        current = self.current_session(t_now)
        last = self._delivered.get(node_id)
        session = current if last is None else max(last + 1, current)
        self._delivered[node_id] = session
        log.debug("sending session %d list to node %d", session, node_id)
        return self.list_for_session(session)


class NodeKeyRing:
    """NodeKeyRing holds the key lists a node has received.

    Only the owning node touches it, so it carries no locking.
    """

    node_id: int
    cardinality: int
    timeout: float
    correction_enabled: bool
    state: SchedulerState
    requests: int
    _lists: dict[int, KeyList]

    def __init__(
        self: NodeKeyRing,
        node_id: int,
        cardinality: int,
        timeout: float,
        *,
        correction_enabled: bool = True,
    ) -> None:
        """Create a NodeKeyRing."""
        self.node_id = node_id
        self.cardinality = cardinality
        self.timeout = timeout
        self.correction_enabled = correction_enabled
        self.state = SchedulerState()
        self.requests = 0
        self._lists = {}

    def lists(self: NodeKeyRing) -> Iterator[KeyList]:
        """Iterate over held lists in session order."""
        for session in sorted(self._lists):
            yield self._lists[session]

    @property
    def newest(self: NodeKeyRing) -> KeyList | None:
        """The list with the highest session counter."""
        if not self._lists:
            return None
        return self._lists[max(self._lists)]

    def mark_request(self: NodeKeyRing, t_now: float) -> int:
        """Record a request sent at t_now and return its request counter."""
        self.state.t_s = t_now
        self.requests += 1
        return self.requests - 1

    def install(self: NodeKeyRing, key_list: KeyList, t_now: float) -> None:
        """Store a list received at t_now and update the correction factor."""
        self.state.t_r = t_now
        t_last = self.state.t_last
        if t_last is not None and self.correction_enabled:
            self.state.c = correction_factor(max(t_last, 0.0), self.timeout)
        self._lists[key_list.session] = key_list
        for session in [s for s, kl in self._lists.items() if kl.expires_at <= t_now]:
            if session != key_list.session:
                del self._lists[session]

    def active_list(self: NodeKeyRing, t_now: float) -> KeyList | None:
        """Return the list whose session covers t_now, if held."""
        for key_list in self._lists.values():
            if key_list.ts_kl <= t_now < key_list.expires_at:
                return key_list
        return None

    def active_key(self: NodeKeyRing, t_now: float) -> tuple[bytes, KeyHandle] | None:
        """Return the key in use at t_now, or None during an outage."""
        key_list = self.active_list(t_now)
        if key_list is None:
            return None
        return lookup_key(key_list, t_now)

    def next_request_time(self: NodeKeyRing) -> float | None:
        """Return when the next list should be requested.

        That is the start of window request_trigger_index of the newest list.
        """
        newest = self.newest
        if newest is None:
            return None
        trigger = request_trigger_index(newest.cardinality, self.state.c)
        return newest.ts_kl + (trigger - 1) * newest.timeout
