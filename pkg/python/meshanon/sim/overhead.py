"""meshanon.sim.overhead - Compare static-key and rotating-key runs."""

from __future__ import annotations

from dataclasses import dataclass
from statistics import fmean
from typing import TYPE_CHECKING, Any

from meshanon.types.scenario import DropCause, ScenarioMismatchError

if TYPE_CHECKING:
    from collections.abc import Sequence

    from meshanon.types.scenario import Metrics

REFERENCE_THROUGHPUT_DROP = 0.07
"""Throughput decrease of key rotation measured with a radio-level model."""


@dataclass(frozen=True)
class OverheadReport:
    """Cost of key rotation relative to a static key."""

    throughput_delta: float
    """Relative throughput decrease, (base - secured) / base."""
    drop_rate_delta: float
    """Secured drop rate minus base drop rate."""
    base_throughput: float
    secured_throughput: float
    secured_drops: dict[DropCause, int]
    runs: int = 1
    reference_delta: float = REFERENCE_THROUGHPUT_DROP

    def to_json(self: OverheadReport) -> dict[str, Any]:
        """Convert to a JSON document."""
        return {
            "throughput_delta": self.throughput_delta,
            "drop_rate_delta": self.drop_rate_delta,
            "base_throughput": self.base_throughput,
            "secured_throughput": self.secured_throughput,
            "secured_drops": {
                cause.value: count for cause, count in self.secured_drops.items()
            },
            "runs": self.runs,
            "reference_delta": self.reference_delta,
        }


def _check_pair(base: Metrics, secured: Metrics) -> None:
    if base.fingerprint != secured.fingerprint or base.seed != secured.seed:
        msg = "runs differ in more than their key mode"
        raise ScenarioMismatchError(msg)


def measure_overhead(base: Metrics, secured: Metrics) -> OverheadReport:
    """Report the throughput and drop-rate cost of secured over base."""
    _check_pair(base, secured)
    if base.throughput > 0:
        delta = (base.throughput - secured.throughput) / base.throughput
    else:
        delta = 0.0
    return OverheadReport(
        delta,
        secured.drop_rate - base.drop_rate,
        base.throughput,
        secured.throughput,
        dict(secured.dropped),
    )


def average_overhead(
    bases: Sequence[Metrics], secured: Sequence[Metrics]
) -> OverheadReport:
    """Average per-seed reports over paired runs."""
    if not bases or len(bases) != len(secured):
        msg = "need the same non-zero number of runs in each mode"
        raise ScenarioMismatchError(msg)
    reports = [measure_overhead(b, s) for b, s in zip(bases, secured)]
    drops = dict.fromkeys(DropCause, 0)
    for report in reports:
        for cause, count in report.secured_drops.items():
            drops[cause] += count
    return OverheadReport(
        fmean(r.throughput_delta for r in reports),
        fmean(r.drop_rate_delta for r in reports),
        fmean(r.base_throughput for r in reports),
        fmean(r.secured_throughput for r in reports),
        drops,
        runs=len(reports),
    )
