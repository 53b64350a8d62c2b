"""meshanon.sim.simulator - Node joins, key-list rotation and traffic over a mesh."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import random
import time
from collections import deque
from dataclasses import dataclass, field
from itertools import pairwise
from typing import TYPE_CHECKING, Any

import simpy

from meshanon.groupmath import gen_group_params
from meshanon.keymgmt import (
    KeyListServer,
    NodeKeyRing,
    generate_key_list,
    lookup_key,
)
from meshanon.ringauth import (
    AuthServer,
    client_confirm,
    gen_server_keys,
    make_directory,
    sign_and_initiate,
)
from meshanon.serialize import (
    decode_key_list,
    decode_key_request,
    decode_response,
    decode_signature,
    encode_key_list,
    encode_key_request,
    encode_response,
    encode_signature,
    scenario_to_dict,
)
from meshanon.sim.engine import MeshEnvironment
from meshanon.sim.trace import TraceRecord
from meshanon.trapdoor import f_eval, keygen
from meshanon.types.keylist import SessionExpiredError
from meshanon.types.permutation import CombiningConfig
from meshanon.types.ring import Reject
from meshanon.types.scenario import (
    DropCause,
    JoinPhase,
    KeyMode,
    Metrics,
    NodeKind,
    SimulationInvariantError,
    TrafficKind,
)
from meshanon.types.trapdoor import Preimage
from meshanon.util import derive_seed, normalize_seed

if TYPE_CHECKING:
    from collections.abc import Callable, Generator

    from simpy.events import Event, Process

    from meshanon.types.keylist import KeyList
    from meshanon.types.scenario import FlowSpec, LinkSpec, NodeSpec, SimScenario
    from meshanon.types.trapdoor import TrapdoorKeyPair

log = logging.getLogger(__name__)

BACKBONE_KINDS = frozenset({NodeKind.MR, NodeKind.IGW})
ASSOCIATION_BYTES = 64
RETRANSMIT_MIN_MS = 20.0
RETRANSMIT_MAX_MS = 640.0


def scenario_fingerprint(scenario: SimScenario) -> str:
    """Digest of the scenario with its key mode left out."""
    doc = scenario_to_dict(scenario)
    doc.pop("mode", None)
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


@dataclass
class NodeState:
    """Run-time state of one node."""

    spec: NodeSpec
    phase: JoinPhase = JoinPhase.DETACHED
    keyring: NodeKeyRing | None = None
    access_peer: int | None = None
    joined_at: float | None = None
    session_keys: dict[int, int] = field(default_factory=dict)
    """Session keys agreed with peers, by peer node id."""
    received: list[tuple[float, KeyList]] = field(default_factory=list)

    @property
    def node_id(self: NodeState) -> int:
        """Node id."""
        return self.spec.node_id

    @property
    def kind(self: NodeState) -> NodeKind:
        """Node role."""
        return self.spec.kind

    def advance(self: NodeState, phase: JoinPhase) -> None:
        """Move to the next join phase."""
        if phase.value != self.phase.value + 1:
            msg = (
                f"node {self.node_id} cannot go from {self.phase.label} "
                f"to {phase.label}"
            )
            raise SimulationInvariantError(msg)
        self.phase = phase


@dataclass(frozen=True)
class _KeyTag:
    session: int
    key_idx: int
    window_end: float


@dataclass
class _Link:
    spec: LinkSpec
    channel: simpy.Resource


@dataclass(frozen=True)
class CryptoCost:
    """Measured per-operation service times."""

    crypto_cost_ms: float
    key_lookup_cost_ms: float


class MeshSimulator:
    """MeshSimulator runs one scenario on a single-threaded event loop.

    Every node starts detached at time zero and joins through a neighbour
    that is already a full router. Routers then keep their key lists fresh
    while the scenario's flows run over the backbone.
    """

    scenario: SimScenario
    env: MeshEnvironment
    metrics: Metrics
    records: list[TraceRecord] | None
    nodes: dict[int, NodeState]
    as_id: int
    key_server: KeyListServer
    auth_server: AuthServer
    _attached: simpy.Event

    def __init__(
        self: MeshSimulator, scenario: SimScenario, *, trace: bool = False
    ) -> None:
        """Create a MeshSimulator."""
        scenario.validate()
        self.scenario = scenario
        self.env = MeshEnvironment()
        self.metrics = Metrics(
            scenario.mode, scenario.seed, scenario_fingerprint(scenario)
        )
        self.records = [] if trace else None
        self._seed = derive_seed(normalize_seed(scenario.seed), b"mesh-sim")
        self._link_rng = random.Random(derive_seed(self._seed, b"links"))
        self._delay_rng = random.Random(derive_seed(self._seed, b"key-delays"))
        self.adjacency = scenario.adjacency()
        self._links = {
            (min(link.a, link.b), max(link.a, link.b)): _Link(
                link, simpy.Resource(self.env, capacity=1)
            )
            for link in scenario.links
        }
        self.nodes = {spec.node_id: NodeState(spec) for spec in scenario.nodes}
        self._attached = self.env.event()
        self.as_id = scenario.authentication_server.node_id
        self.key_server = KeyListServer(
            derive_seed(self._seed, b"key-lists"),
            scenario.key.cardinality,
            scenario.key.timeout_ms,
        )
        self._setup_ring()

    def _setup_ring(self: MeshSimulator) -> None:
        ring_cfg = self.scenario.ring
        self.ring_keys: list[TrapdoorKeyPair] = []
        for index in range(ring_cfg.n):
            group = gen_group_params(
                ring_cfg.p_bits,
                ring_cfg.q_bits,
                derive_seed(self._seed, b"ring-group", index),
                allow_tiny=True,
            )
            key_seed = derive_seed(self._seed, b"ring-key", index)
            self.ring_keys.append(keygen(group, key_seed))
        self.ring = make_directory(
            (f"member-{index}".encode(), pair.public)
            for index, pair in enumerate(self.ring_keys)
        )
        server_group = gen_group_params(
            ring_cfg.p_bits,
            ring_cfg.q_bits,
            derive_seed(self._seed, b"server-group"),
            allow_tiny=True,
        )
        cfg = (
            CombiningConfig(ring_cfg.bits)
            if ring_cfg.bits is not None
            else CombiningConfig.for_ring(self.ring)
        )
        self.auth_server = AuthServer(
            gen_server_keys(server_group, derive_seed(self._seed, b"server-key")),
            self.ring,
            cfg,
            derive_seed(self._seed, b"auth-server"),
        )

    def record(
        self: MeshSimulator, node: int, event: str, **detail: Any  # noqa: ANN401
    ) -> TraceRecord:
        """Create a trace record and keep it if tracing is on."""
        entry = TraceRecord(self.env.now, node, event, detail)
        if self.records is not None:
            self.records.append(entry)
        return entry

    @property
    def horizon_ms(self: MeshSimulator) -> float:
        """Time at which the run stops."""
        return self.scenario.horizon_ms

    def is_full(self: MeshSimulator, node_id: int) -> bool:
        """True for the AS and for routers that finished joining."""
        if node_id == self.as_id:
            return True
        return self.nodes[node_id].phase is JoinPhase.FULL_MR

    def can_relay(self: MeshSimulator, node_id: int) -> bool:
        """True for backbone routers that may forward traffic."""
        state = self.nodes[node_id]
        return state.kind in BACKBONE_KINDS and state.phase is JoinPhase.FULL_MR

    def route(
        self: MeshSimulator,
        src: int,
        dst: int,
        relay: Callable[[int], bool],
    ) -> list[int] | None:
        """Shortest path from src to dst through nodes accepted by relay."""
        previous: dict[int, int | None] = {src: None}
        queue = deque([src])
        while queue:
            node = queue.popleft()
            if node == dst:
                path = [node]
                while (parent := previous[path[-1]]) is not None:
                    path.append(parent)
                return path[::-1]
            for neighbour in self.adjacency[node]:
                if neighbour in previous:
                    continue
                if neighbour == dst or relay(neighbour):
                    previous[neighbour] = node
                    queue.append(neighbour)
        return None

    def _relay_to_as(self: MeshSimulator, node_id: int) -> bool:
        return node_id != self.as_id and self.can_relay(node_id)

    def _link(self: MeshSimulator, u: int, v: int) -> _Link:
        return self._links[(min(u, v), max(u, v))]

    def _propagation(self: MeshSimulator, link: _Link) -> float:
        delay = link.spec.delay
        return delay.base_ms + self._link_rng.uniform(0.0, delay.jitter_ms)

    def _service(self: MeshSimulator, link: _Link, size: int) -> float:
        return size * 8_000 / link.spec.bandwidth_bps + self.scenario.crypto_cost_ms

    def _transmit(
        self: MeshSimulator, u: int, v: int, size: int
    ) -> Generator[Event, Any, bool]:
        link = self._link(u, v)
        with link.channel.request() as request:
            yield request
            yield self.env.timeout(self._service(link, size))
        yield self.env.timeout(self._propagation(link))
        return self._link_rng.random() >= link.spec.loss

    def _carry(
        self: MeshSimulator, path: list[int], size: int
    ) -> Generator[Event, Any, None]:
        """Move a control message along a path, repeating lost hops."""
        for u, v in pairwise(path):
            while not (yield from self._transmit(u, v, size)):
                pass

    def _path_to_as(self: MeshSimulator, state: NodeState) -> list[int] | None:
        peer = state.access_peer
        if peer is None:
            return None
        if peer == self.as_id:
            return [state.node_id, self.as_id]
        tail = self.route(peer, self.as_id, self._relay_to_as)
        return None if tail is None else [state.node_id, *tail]

    def access_peer(self: MeshSimulator, node_id: int) -> int | None:
        """Return the neighbour a detached node can associate with."""
        for neighbour in self.adjacency[node_id]:
            if neighbour == self.as_id and self._link(node_id, neighbour).spec.wired:
                return neighbour
        for neighbour in self.adjacency[node_id]:
            if self.can_relay(neighbour):
                return neighbour
        return None

    def _advance(
        self: MeshSimulator,
        state: NodeState,
        phase: JoinPhase,
        events: list[TraceRecord],
    ) -> None:
        state.advance(phase)
        log.debug("t=%.3f node %d is %s", self.env.now, state.node_id, phase.label)
        attached, self._attached = self._attached, self.env.event()
        attached.succeed()
        events.append(self.record(state.node_id, "phase", phase=phase.label))

    def join(
        self: MeshSimulator, node_id: int
    ) -> Generator[Event, Any, list[TraceRecord]]:
        """Run the join phases of one node and return its join events.

        Clients stop once authenticated to the AS; routers go on to fetch
        their first key list and become full routers.
        """
        state = self.nodes[node_id]
        target = (
            JoinPhase.AUTHENTICATED_TO_AS
            if state.kind is NodeKind.MC
            else JoinPhase.FULL_MR
        )
        start = self.env.now
        events: list[TraceRecord] = []
        attempt = 0
        self.metrics.join_latency_ms[node_id] = math.inf
        while state.phase.value < target.value:
            if state.phase is JoinPhase.DETACHED:
                peer = self.access_peer(node_id)
                if peer is None:
                    events.append(self.record(node_id, "join-retry"))
                    yield self.env.timeout(self.scenario.join_retry_ms)
                    continue
                yield from self._carry([node_id, peer], ASSOCIATION_BYTES)
                yield from self._carry([peer, node_id], ASSOCIATION_BYTES)
                state.access_peer = peer
                self._advance(state, JoinPhase.ASSOCIATED_AS_MC, events)
            elif state.phase is JoinPhase.ASSOCIATED_AS_MC:
                accepted = yield from self._authenticate(state, attempt)
                attempt += 1
                if not accepted:
                    events.append(self.record(node_id, "auth-reject"))
                    yield self.env.timeout(self.scenario.join_retry_ms)
                    continue
                self._advance(state, JoinPhase.AUTHENTICATED_TO_AS, events)
            else:
                state.keyring = NodeKeyRing(
                    node_id,
                    self.scenario.key.cardinality,
                    self.scenario.key.timeout_ms,
                    correction_enabled=self.scenario.key.correction_enabled,
                )
                fetched = yield from self._fetch_key_list(state, first=True)
                if not fetched:
                    yield self.env.timeout(self.scenario.join_retry_ms)
                    continue
                self._advance(state, JoinPhase.FULL_MR, events)
        state.joined_at = self.env.now
        self.metrics.join_latency_ms[node_id] = self.env.now - start
        rotating = self.scenario.mode is KeyMode.ROTATING
        if state.phase is JoinPhase.FULL_MR and rotating:
            self.env.spawn(node_id, self._key_scheduler(state))
        return events

    def _authenticate(
        self: MeshSimulator, state: NodeState, attempt: int
    ) -> Generator[Event, Any, bool]:
        node_id = state.node_id
        path = self._path_to_as(state)
        if path is None:
            return False
        member = node_id % len(self.ring)
        identity = derive_seed(self._seed, b"identity", node_id, attempt)
        cfg = self.auth_server.cfg
        sig, session = sign_and_initiate(
            self.ring,
            member,
            self.ring_keys[member].private,
            self.auth_server.public,
            identity,
            cfg,
            derive_seed(self._seed, b"sign", node_id, attempt),
        )
        sig_bytes = encode_signature(sig, cfg.bits)
        self.metrics.signature_bytes.append(len(sig_bytes))
        ring_cost = self.scenario.crypto_cost_ms * len(self.ring)
        yield self.env.timeout(ring_cost)
        yield from self._carry(path, len(sig_bytes))
        yield self.env.timeout(ring_cost)
        received = decode_signature(sig_bytes, cfg.bits)
        verdict = self.auth_server.handle(received, identity)
        if isinstance(verdict, Reject):
            self.metrics.auth_rejects += 1
            return False
        resp_bytes = encode_response(verdict.response)
        yield from self._carry(path[::-1], len(resp_bytes))
        confirmed = client_confirm(session, decode_response(resp_bytes))
        if isinstance(confirmed, Reject):
            self.metrics.auth_rejects += 1
            return False
        state.session_keys[self.as_id] = confirmed.session_key
        return True

    def _fetch_key_list(
        self: MeshSimulator, state: NodeState, *, first: bool
    ) -> Generator[Event, Any, bool]:
        """Request the next key list; the first one goes via the access peer."""
        keyring = state.keyring
        if keyring is None:
            msg = f"node {state.node_id} has no key ring"
            raise SimulationInvariantError(msg)
        path = (
            self._path_to_as(state)
            if first
            else self.route(state.node_id, self.as_id, self._relay_to_as)
        )
        if path is None:
            return False
        counter = keyring.mark_request(self.env.now)
        self.metrics.key_requests += 1
        request = encode_key_request(state.node_id, counter)
        self.record(state.node_id, "key-request", counter=counter)
        yield from self._carry(path, len(request))

        requester, _ = decode_key_request(request)
        yield self.env.timeout(self.scenario.key.as_service_ms)
        payload = encode_key_list(self.key_server.respond(requester, self.env.now))
        yield from self._carry(path[::-1], len(payload))
        extra = state.spec.key_response_delay
        yield self.env.timeout(
            extra.base_ms + self._delay_rng.uniform(0.0, extra.jitter_ms)
        )

        key_list = decode_key_list(payload, self.key_server.epoch)
        keyring.install(key_list, self.env.now)
        state.received.append((self.env.now, key_list))
        log.debug(
            "t=%.3f node %d got session %d, c=%d",
            self.env.now,
            state.node_id,
            key_list.session,
            keyring.state.c,
        )
        self.record(
            state.node_id, "key-list", session=key_list.session, c=keyring.state.c
        )
        return True

    def _key_scheduler(
        self: MeshSimulator, state: NodeState
    ) -> Generator[Event, Any, None]:
        keyring = state.keyring
        if keyring is None:
            return
        while True:
            due = keyring.next_request_time()
            if due is not None and due > self.env.now:
                yield self.env.timeout(due - self.env.now)
            fetched = yield from self._fetch_key_list(state, first=False)
            if not fetched:
                yield self.env.timeout(self.scenario.join_retry_ms)

    def key_tag(self: MeshSimulator, node_id: int) -> _KeyTag | None:
        """Key a node would use if it sent now, or None during an outage."""
        keyring = self.nodes[node_id].keyring
        if keyring is None:
            return None
        key_list = keyring.active_list(self.env.now)
        if key_list is None:
            return None
        try:
            _, handle = lookup_key(key_list, self.env.now)
        except SessionExpiredError as e:
            msg = f"node {node_id} is about to transmit under an expired key"
            raise SimulationInvariantError(msg) from e
        window_end = self.env.now + handle.remaining
        if window_end <= self.env.now:
            msg = f"node {node_id} is about to transmit under an expired key"
            raise SimulationInvariantError(msg)
        return _KeyTag(key_list.session, handle.key_idx, window_end)

    def _keyed(self: MeshSimulator, u: int, v: int) -> bool:
        return (
            self.scenario.mode is KeyMode.ROTATING
            and self.nodes[u].kind in BACKBONE_KINDS
            and self.nodes[v].kind in BACKBONE_KINDS
        )

    def _packet_hop(
        self: MeshSimulator, u: int, v: int, size: int
    ) -> Generator[Event, Any, DropCause | None]:
        link = self._link(u, v)
        keyed = self._keyed(u, v)
        tag = None
        with link.channel.request() as request:
            yield request
            service = self._service(link, size)
            if keyed:
                tag = self.key_tag(u)
                if tag is None:
                    return DropCause.NO_KEY
                service += self.scenario.key_lookup_cost_ms
            yield self.env.timeout(service)
        yield self.env.timeout(self._propagation(link))
        if self._link_rng.random() < link.spec.loss:
            return DropCause.LINK_LOSS
        if tag is None:
            return None
        if self.env.now >= tag.window_end:
            return DropCause.IN_FLIGHT_AT_EXPIRY
        peer = self.key_tag(v)
        if peer is None:
            return DropCause.NO_KEY
        if (peer.session, peer.key_idx) != (tag.session, tag.key_idx):
            return DropCause.IN_FLIGHT_AT_EXPIRY
        return None

    def _endpoint_ready(self: MeshSimulator, node_id: int) -> bool:
        state = self.nodes[node_id]
        if state.kind is NodeKind.MC:
            return state.phase is JoinPhase.AUTHENTICATED_TO_AS
        return state.phase is JoinPhase.FULL_MR

    def _ready_path(self: MeshSimulator, flow: FlowSpec) -> list[int] | None:
        if not (self._endpoint_ready(flow.source) and self._endpoint_ready(flow.sink)):
            return None
        return self.route(flow.source, flow.sink, self.can_relay)

    def _drop(self: MeshSimulator, flow: int, node: int, cause: DropCause) -> None:
        self.metrics.in_flight -= 1
        self.metrics.dropped[cause] += 1
        self.record(node, "drop", flow=flow, cause=cause.value)

    def _deliver(
        self: MeshSimulator, index: int, flow: FlowSpec
    ) -> Generator[Event, Any, None]:
        # held at the source until both ends have joined and a route exists
        while (path := self._ready_path(flow)) is None:
            yield self._attached
        for u, v in pairwise(path):
            backoff = RETRANSMIT_MIN_MS
            while True:
                cause = yield from self._packet_hop(u, v, flow.packet_bytes)
                if cause is None:
                    break
                if flow.kind is TrafficKind.DATAGRAM:
                    self._drop(index, u, cause)
                    return
                self.metrics.retransmissions += 1
                yield self.env.timeout(backoff)
                backoff = min(2 * backoff, RETRANSMIT_MAX_MS)
        self.metrics.in_flight -= 1
        self.metrics.delivered += 1
        self.metrics.delivered_bytes += flow.packet_bytes

    def _flow(
        self: MeshSimulator, index: int, flow: FlowSpec
    ) -> Generator[Event, Any, None]:
        if flow.start_ms > self.env.now:
            yield self.env.timeout(flow.start_ms - self.env.now)
        while self.env.now < flow.end_ms:
            self.metrics.sent += 1
            self.metrics.in_flight += 1
            self.env.spawn(flow.source, self._deliver(index, flow))
            yield self.env.timeout(flow.interval_ms)

    def _outage(self: MeshSimulator, state: NodeState) -> float:
        """Time since joining during which the node held no valid key."""
        if state.joined_at is None or self.scenario.mode is KeyMode.STATIC:
            return 0.0
        horizon = self.horizon_ms
        joined = state.joined_at
        spans = sorted(
            (
                max(key_list.ts_kl, received_at, joined),
                min(key_list.expires_at, horizon),
            )
            for received_at, key_list in state.received
        )
        covered = 0.0
        reach = joined
        for begin, end in spans:
            begin = max(begin, reach)  # noqa: PLW2901
            if end > begin:
                covered += end - begin
                reach = end
        return max(0.0, horizon - joined - covered)

    def run(self: MeshSimulator) -> Metrics:
        """Run to the scenario horizon and return the metrics."""
        for node_id in sorted(self.nodes):
            if node_id != self.as_id:
                simulate_join(self, node_id)
        for index, flow in enumerate(self.scenario.flows):
            self.env.spawn(flow.source, self._flow(index, flow))
        self.env.run(until=self.horizon_ms)

        self.metrics.sim_time_ms = self.horizon_ms
        for node_id, state in sorted(self.nodes.items()):
            if state.kind in BACKBONE_KINDS and state.joined_at is not None:
                self.metrics.key_outage_ms[node_id] = self._outage(state)
        self.metrics.check_accounting()
        log.info(
            "run seed=%d mode=%s: %d sent, %d delivered, %d dropped, %d in flight",
            self.metrics.seed,
            self.metrics.mode.value,
            self.metrics.sent,
            self.metrics.delivered,
            self.metrics.total_dropped,
            self.metrics.in_flight,
        )
        return self.metrics


def simulate_join(sim: MeshSimulator, node_id: int) -> Process:
    """Start the join of a detached node; the process yields its join events."""
    state = sim.nodes[node_id]
    if state.phase is not JoinPhase.DETACHED:
        msg = f"node {node_id} is already {state.phase.label}"
        raise SimulationInvariantError(msg)
    return sim.env.spawn(node_id, sim.join(node_id))


def run(scenario: SimScenario, *, trace: bool = False) -> Metrics:
    """Run a scenario once; validation failures raise ScenarioError."""
    return MeshSimulator(scenario, trace=trace).run()


def calibrate_crypto_cost(
    p_bits: int = 64, q_bits: int = 32, samples: int = 200
) -> CryptoCost:
    """Time f_eval and lookup_key on this machine.

    The result may be copied into a scenario; runs never call this
    themselves, so they stay deterministic.
    """
    seed = b"calibration"
    pair = keygen(gen_group_params(p_bits, q_bits, seed, allow_tiny=True), seed)
    pre = Preimage(2, 1)
    started = time.perf_counter()
    for _ in range(samples):
        f_eval(pair.public, pre)
    crypto_ms = (time.perf_counter() - started) * 1000 / samples

    key_list = generate_key_list(0, 0.0, 10, 1000.0, seed)
    started = time.perf_counter()
    for i in range(samples):
        lookup_key(key_list, float(i % 10_000))
    lookup_ms = (time.perf_counter() - started) * 1000 / samples
    return CryptoCost(crypto_ms, lookup_ms)
