"""meshanon.sim - Discrete-event simulation of the three-tier mesh."""

from __future__ import annotations

from meshanon.sim.engine import MeshEnvironment
from meshanon.sim.overhead import OverheadReport, average_overhead, measure_overhead
from meshanon.sim.simulator import (
    CryptoCost,
    MeshSimulator,
    NodeState,
    calibrate_crypto_cost,
    run,
    scenario_fingerprint,
    simulate_join,
)
from meshanon.sim.topology import (
    build_bootstrap_topology,
    build_evaluation_topology,
)
from meshanon.sim.trace import TraceRecord, read_trace, write_trace

__all__ = [
    "CryptoCost",
    "MeshEnvironment",
    "MeshSimulator",
    "NodeState",
    "OverheadReport",
    "TraceRecord",
    "average_overhead",
    "build_bootstrap_topology",
    "build_evaluation_topology",
    "calibrate_crypto_cost",
    "measure_overhead",
    "read_trace",
    "run",
    "scenario_fingerprint",
    "simulate_join",
    "write_trace",
]
