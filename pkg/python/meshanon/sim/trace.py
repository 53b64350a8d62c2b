"""meshanon.sim.trace - Per-event trace records."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

from meshanon.serialize import SerializationError

if TYPE_CHECKING:
    from collections.abc import Iterable
    from pathlib import Path


@dataclass(frozen=True)
class TraceRecord:
    """One simulation event."""

    time_ms: float
    node: int
    event: str
    detail: dict[str, Any] = field(default_factory=dict)

    def to_json(self: TraceRecord) -> str:
        """Encode as one NDJSON line, without the newline."""
        return json.dumps(
            {
                "time_ms": self.time_ms,
                "node": self.node,
                "event": self.event,
                "detail": self.detail,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls: type[TraceRecord], line: bytes | str) -> TraceRecord:
        """Decode one NDJSON line."""
        try:
            doc = json.loads(line)
            return cls(doc["time_ms"], doc["node"], doc["event"], doc["detail"])
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            msg = "malformed trace record"
            raise SerializationError(msg) from e


def write_trace(records: Iterable[TraceRecord], path: Path) -> None:
    """Write records as newline-delimited JSON."""
    with path.open("w") as file:
        for record in records:
            file.write(record.to_json() + "\n")


def read_trace(path: Path) -> list[TraceRecord]:
    """Read a trace written by write_trace."""
    with path.open("rb") as file:
        return [TraceRecord.from_json(line) for line in file if line.strip()]
