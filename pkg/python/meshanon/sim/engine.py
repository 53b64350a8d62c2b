"""meshanon.sim.engine - A simpy environment with per-node event tie-breaking."""

from __future__ import annotations

import itertools
from heapq import heappush
from typing import TYPE_CHECKING, Any

import simpy
from simpy.core import NORMAL

if TYPE_CHECKING:
    from collections.abc import Generator

    from simpy.events import Event, Process

NO_OWNER = -1


class MeshEnvironment(simpy.Environment):
    """MeshEnvironment orders simultaneous events by owning node, then sequence.

    simpy breaks ties between events with equal time and priority by a global
    insertion counter. Here the node id of the process that scheduled the
    event comes first, so the order of simultaneous events is
    (time, priority, node id, sequence).
    """

    _owners: dict[Process, int]
    _sequence: itertools.count[int]

    def __init__(self: MeshEnvironment, initial_time: float = 0) -> None:
        """Create a MeshEnvironment."""
        super().__init__(initial_time)
        self._owners = {}
        self._sequence = itertools.count()

    def spawn(
        self: MeshEnvironment,
        node_id: int,
        generator: Generator[Event, Any, Any],
    ) -> Process:
        """Start a process owned by node_id."""
        process = self.process(generator)
        self._owners[process] = node_id
        process.callbacks.append(lambda _: self._owners.pop(process, None))
        return process

    def owner(self: MeshEnvironment) -> int:
        """Node id owning the running process, or NO_OWNER."""
        active = self.active_process
        if active is None:
            return NO_OWNER
        return self._owners.get(active, NO_OWNER)

    def schedule(
        self: MeshEnvironment,
        event: Event,
        priority: Any = NORMAL,  # noqa: ANN401
        delay: float = 0,
    ) -> None:
        """Schedule an event keyed by (time, priority, node id, sequence)."""
        heappush(
            self._queue,
            (
                self._now + delay,
                priority,
                (self.owner(), next(self._sequence)),  # type: ignore[arg-type]
                event,
            ),
        )
