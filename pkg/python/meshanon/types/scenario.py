"""meshanon.types.scenario - Mesh simulation scenarios and their measured outcomes."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum


class SimulationError(Exception):
    """An error occurred while building or running a simulation."""


class ScenarioError(SimulationError):
    """A scenario violates its invariants."""


class SimulationInvariantError(SimulationError):
    """A run broke a protocol invariant, so its results are void."""


class ScenarioMismatchError(SimulationError):
    """Two runs being compared did not use the same scenario."""


class NodeKind(str, Enum):
    """Role of a node in the three-tier mesh."""

    AS = "AS"
    IGW = "IGW"
    MR = "MR"
    MC = "MC"


class JoinPhase(int, Enum):
    """Join progress of a node; values only ever increase."""

    DETACHED = 0
    ASSOCIATED_AS_MC = 1
    AUTHENTICATED_TO_AS = 2
    FULL_MR = 3

    @property
    def label(self: JoinPhase) -> str:
        """Human readable name used in traces."""
        return _PHASE_LABELS[self]


_PHASE_LABELS = {
    JoinPhase.DETACHED: "detached",
    JoinPhase.ASSOCIATED_AS_MC: "associated-as-MC",
    JoinPhase.AUTHENTICATED_TO_AS: "authenticated-to-AS",
    JoinPhase.FULL_MR: "full-MR",
}


class TrafficKind(str, Enum):
    """Traffic class of a flow."""

    RELIABLE_STREAM = "reliable-stream"
    DATAGRAM = "datagram"


class KeyMode(str, Enum):
    """How backbone traffic is keyed."""

    STATIC = "static-key"
    ROTATING = "rotating-key"


class DropCause(str, Enum):
    """Why a packet was dropped."""

    NO_KEY = "no-key"
    IN_FLIGHT_AT_EXPIRY = "in-flight-at-expiry"
    LINK_LOSS = "link-loss"


@dataclass(frozen=True)
class DelaySpec:
    """A delay drawn uniformly from [base_ms, base_ms + jitter_ms]."""

    base_ms: float = 0.0
    jitter_ms: float = 0.0

    def __post_init__(self: DelaySpec) -> None:
        """Reject negative delays."""
        if self.base_ms < 0 or self.jitter_ms < 0:
            msg = "delays must be non-negative"
            raise ScenarioError(msg)

    @property
    def max_ms(self: DelaySpec) -> float:
        """Largest delay this spec can produce."""
        return self.base_ms + self.jitter_ms


@dataclass(frozen=True)
class NodeSpec:
    """A node of the topology."""

    node_id: int
    kind: NodeKind
    name: str = ""
    key_response_delay: DelaySpec = field(default_factory=DelaySpec)
    """Extra delay on key-list responses to this node (fading, congestion)."""


@dataclass(frozen=True)
class LinkSpec:
    """An undirected link between two nodes."""

    a: int
    b: int
    delay: DelaySpec = field(default_factory=lambda: DelaySpec(2.0, 1.0))
    loss: float = 0.0
    bandwidth_bps: float = 11e6
    wired: bool = False

    def __post_init__(self: LinkSpec) -> None:
        """Check loss probability and bandwidth."""
        if not 0.0 <= self.loss < 1.0:
            msg = "loss probability must be in [0, 1)"
            raise ScenarioError(msg)
        if self.bandwidth_bps <= 0:
            msg = "bandwidth must be positive"
            raise ScenarioError(msg)


@dataclass(frozen=True)
class KeyConfig:
    """Key-list parameters shared by the AS and every node."""

    cardinality: int = 10
    timeout_ms: float = 1000.0
    correction_enabled: bool = True
    as_service_ms: float = 1.0

    def __post_init__(self: KeyConfig) -> None:
        """Check cardinality and timeout."""
        if self.cardinality < 1 or self.timeout_ms <= 0:
            msg = "cardinality must be >= 1 and timeout positive"
            raise ScenarioError(msg)
        # key lists carry the timeout as whole milliseconds
        if not float(self.timeout_ms).is_integer():
            msg = f"timeout must be a whole number of ms, got {self.timeout_ms}"
            raise ScenarioError(msg)

    @property
    def session_ms(self: KeyConfig) -> float:
        """Length of one key-list session."""
        return self.cardinality * self.timeout_ms


@dataclass(frozen=True)
class RingConfig:
    """Ring parameters used when routers authenticate to the AS."""

    n: int = 5
    p_bits: int = 64
    q_bits: int = 32
    bits: int | None = None
    """Combining block width; None picks the widest member modulus."""

    def __post_init__(self: RingConfig) -> None:
        """Check ring size and group sizes."""
        if self.n < 1 or self.q_bits >= self.p_bits:
            msg = "ring size must be >= 1 and q_bits < p_bits"
            raise ScenarioError(msg)


@dataclass(frozen=True)
class FlowSpec:
    """A constant bit rate traffic flow."""

    source: int
    sink: int
    rate_bps: float
    duration_ms: float
    kind: TrafficKind = TrafficKind.DATAGRAM
    start_ms: float = 25_000.0
    packet_bytes: int = 1000

    @property
    def end_ms(self: FlowSpec) -> float:
        """Time after which the flow injects no packets."""
        return self.start_ms + self.duration_ms

    @property
    def interval_ms(self: FlowSpec) -> float:
        """Spacing between two packets."""
        return self.packet_bytes * 8 * 1000 / self.rate_bps


@dataclass(frozen=True)
class SimScenario:
    """Topology, traffic and protocol configuration of one simulation run."""

    nodes: tuple[NodeSpec, ...]
    links: tuple[LinkSpec, ...]
    flows: tuple[FlowSpec, ...] = ()
    key: KeyConfig = field(default_factory=KeyConfig)
    ring: RingConfig = field(default_factory=RingConfig)
    mode: KeyMode = KeyMode.ROTATING
    seed: int = 0
    crypto_cost_ms: float = 0.05
    key_lookup_cost_ms: float = 0.01
    join_retry_ms: float = 500.0
    drain_ms: float = 2000.0
    end_ms: float | None = None

    def node(self: SimScenario, node_id: int) -> NodeSpec:
        """Return a node by id."""
        for spec in self.nodes:
            if spec.node_id == node_id:
                return spec
        msg = f"unknown node {node_id}"
        raise ScenarioError(msg)

    @property
    def authentication_server(self: SimScenario) -> NodeSpec:
        """Return the single AS node."""
        return next(n for n in self.nodes if n.kind is NodeKind.AS)

    @property
    def horizon_ms(self: SimScenario) -> float:
        """Simulated time at which the run stops."""
        if self.end_ms is not None:
            return self.end_ms
        last = max((flow.end_ms for flow in self.flows), default=0.0)
        return last + self.drain_ms

    def adjacency(self: SimScenario) -> dict[int, list[int]]:
        """Neighbour lists in ascending node id order."""
        adjacency: dict[int, list[int]] = {spec.node_id: [] for spec in self.nodes}
        for link in self.links:
            adjacency[link.a].append(link.b)
            adjacency[link.b].append(link.a)
        for neighbours in adjacency.values():
            neighbours.sort()
        return adjacency

    def validate(self: SimScenario) -> None:
        """Raise ScenarioError unless the scenario invariants hold."""
        ids = [spec.node_id for spec in self.nodes]
        if len(set(ids)) != len(ids):
            msg = "node ids must be unique"
            raise ScenarioError(msg)
        servers = [spec for spec in self.nodes if spec.kind is NodeKind.AS]
        if len(servers) != 1:
            msg = f"expected exactly one AS, found {len(servers)}"
            raise ScenarioError(msg)
        known = set(ids)
        for link in self.links:
            if link.a not in known or link.b not in known or link.a == link.b:
                msg = f"link {link.a}-{link.b} references unknown nodes"
                raise ScenarioError(msg)
        for flow in self.flows:
            if flow.source not in known or flow.sink not in known:
                msg = f"flow {flow.source}->{flow.sink} references unknown nodes"
                raise ScenarioError(msg)
            if flow.rate_bps <= 0 or flow.duration_ms < 0 or flow.packet_bytes <= 0:
                msg = "flows need a positive rate and packet size"
                raise ScenarioError(msg)
        reachable = self._reachable_from(servers[0].node_id)
        for spec in self.nodes:
            if spec.kind is NodeKind.MR and spec.node_id not in reachable:
                msg = f"MR {spec.node_id} has no path to the AS"
                raise ScenarioError(msg)

    def _reachable_from(self: SimScenario, start: int) -> set[int]:
        adjacency = self.adjacency()
        seen = {start}
        queue = deque([start])
        while queue:
            for neighbour in adjacency[queue.popleft()]:
                if neighbour not in seen:
                    seen.add(neighbour)
                    queue.append(neighbour)
        return seen

    def with_mode(self: SimScenario, mode: KeyMode) -> SimScenario:
        """Return the same scenario keyed differently."""
        return replace(self, mode=mode)


@dataclass
class Metrics:
    """Measured outcome of one simulation run."""

    mode: KeyMode
    seed: int
    fingerprint: str
    """Digest of the scenario with its mode removed."""
    sim_time_ms: float = 0.0
    sent: int = 0
    delivered: int = 0
    dropped: dict[DropCause, int] = field(
        default_factory=lambda: dict.fromkeys(DropCause, 0)
    )
    in_flight: int = 0
    delivered_bytes: int = 0
    retransmissions: int = 0
    key_requests: int = 0
    auth_rejects: int = 0
    key_outage_ms: dict[int, float] = field(default_factory=dict)
    join_latency_ms: dict[int, float] = field(default_factory=dict)
    """math.inf for nodes that never joined."""
    signature_bytes: list[int] = field(default_factory=list)

    @property
    def total_dropped(self: Metrics) -> int:
        """Drops over every cause."""
        return sum(self.dropped.values())

    @property
    def throughput(self: Metrics) -> float:
        """Delivered payload bytes per simulated second."""
        if self.sim_time_ms <= 0:
            return 0.0
        return self.delivered_bytes * 1000 / self.sim_time_ms

    @property
    def drop_rate(self: Metrics) -> float:
        """Fraction of injected packets that were dropped."""
        if self.sent == 0:
            return 0.0
        return self.total_dropped / self.sent

    def check_accounting(self: Metrics) -> None:
        """Raise SimulationInvariantError if the packet partition is broken."""
        if self.delivered + self.total_dropped + self.in_flight != self.sent:
            msg = (
                f"packet accounting broken: {self.delivered} delivered + "
                f"{self.total_dropped} dropped + {self.in_flight} in flight "
                f"!= {self.sent} sent"
            )
            raise SimulationInvariantError(msg)
        counters = [self.sent, self.delivered, self.in_flight, *self.dropped.values()]
        if min(counters) < 0:
            msg = "negative counter"
            raise SimulationInvariantError(msg)
