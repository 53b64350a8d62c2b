"""meshanon.sim.topology - Reference mesh topologies."""

from __future__ import annotations

from collections import deque

from meshanon.types.scenario import (
    DelaySpec,
    FlowSpec,
    KeyConfig,
    KeyMode,
    LinkSpec,
    NodeKind,
    NodeSpec,
    SimScenario,
    TrafficKind,
)

AS_ID = 0
ROUTERS = 5
CLIENTS_PER_ROUTER = 9
FLOW_START_MS = 25_000.0
FLOW_DURATION_MS = 40_000.0

WIRED = LinkSpec(0, 0, DelaySpec(0.5, 0.0), bandwidth_bps=100e6, wired=True)
BACKBONE = LinkSpec(0, 0)
ACCESS = LinkSpec(0, 0, DelaySpec(1.0, 0.0))

# Key-list responses to a router h hops from the AS are held back by
# (h - 0.6) timeouts, so the farthest routers see about 2.4 timeouts.
_HOP_DELAY_OFFSET = 0.6
_HOP_DELAY_JITTER = 0.05


def _link(template: LinkSpec, a: int, b: int) -> LinkSpec:
    return LinkSpec(
        a, b, template.delay, template.loss, template.bandwidth_bps, template.wired
    )


def _hops(links: list[LinkSpec], start: int) -> dict[int, int]:
    adjacency: dict[int, list[int]] = {}
    for link in links:
        adjacency.setdefault(link.a, []).append(link.b)
        adjacency.setdefault(link.b, []).append(link.a)
    hops = {start: 0}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        for neighbour in sorted(adjacency.get(node, [])):
            if neighbour not in hops:
                hops[neighbour] = hops[node] + 1
                queue.append(neighbour)
    return hops


def build_evaluation_topology(
    seed: int = 0,
    mode: KeyMode = KeyMode.ROTATING,
    *,
    correction_enabled: bool = True,
    client_flow: bool = False,
) -> SimScenario:
    """Build the 50-node evaluation mesh plus the AS.

    Five routers form a ring with router 1 wired to the AS and nine clients
    attached to each router. A reliable 2 Mbit/s stream runs from router 1
    to router 2 and a 1 Mbit/s datagram flow from router 3 to router 4.
    """
    key = KeyConfig(correction_enabled=correction_enabled)
    routers = list(range(1, ROUTERS + 1))
    links = [_link(WIRED, AS_ID, routers[0])]
    links += [
        _link(BACKBONE, r, routers[(i + 1) % ROUTERS]) for i, r in enumerate(routers)
    ]
    clients: dict[int, list[int]] = {}
    next_id = ROUTERS + 1
    for router in routers:
        clients[router] = list(range(next_id, next_id + CLIENTS_PER_ROUTER))
        links += [_link(ACCESS, router, client) for client in clients[router]]
        next_id += CLIENTS_PER_ROUTER

    hops = _hops(links, AS_ID)
    nodes = [NodeSpec(AS_ID, NodeKind.AS, "AS")]
    nodes += [
        NodeSpec(
            router,
            NodeKind.MR,
            f"MR{router}",
            DelaySpec(
                (hops[router] - _HOP_DELAY_OFFSET) * key.timeout_ms,
                _HOP_DELAY_JITTER * key.timeout_ms,
            ),
        )
        for router in routers
    ]
    nodes += [
        NodeSpec(client, NodeKind.MC, f"MC{client}")
        for router in routers
        for client in clients[router]
    ]

    flows = [
        FlowSpec(
            1, 2, 2e6, FLOW_DURATION_MS, TrafficKind.RELIABLE_STREAM, FLOW_START_MS
        ),
        FlowSpec(3, 4, 1e6, FLOW_DURATION_MS, TrafficKind.DATAGRAM, FLOW_START_MS),
    ]
    if client_flow:
        flows.append(
            FlowSpec(
                clients[2][0],
                clients[5][0],
                0.5e6,
                FLOW_DURATION_MS,
                TrafficKind.DATAGRAM,
                FLOW_START_MS,
            )
        )
    scenario = SimScenario(
        nodes=tuple(nodes),
        links=tuple(links),
        flows=tuple(flows),
        key=key,
        mode=mode,
        seed=seed,
    )
    scenario.validate()
    return scenario


def build_bootstrap_topology(seed: int = 0) -> SimScenario:
    """Build the four-router bootstrap mesh.

    Router A is wired to the AS, B and C hear only A, and D hears only B and
    C, so routers can join only in the order A, {B, C}, D.
    """
    a, b, c, d = 1, 2, 3, 4
    nodes = (
        NodeSpec(AS_ID, NodeKind.AS, "AS"),
        NodeSpec(a, NodeKind.MR, "A"),
        NodeSpec(b, NodeKind.MR, "B"),
        NodeSpec(c, NodeKind.MR, "C"),
        NodeSpec(d, NodeKind.MR, "D"),
    )
    links = (
        _link(WIRED, AS_ID, a),
        _link(BACKBONE, a, b),
        _link(BACKBONE, a, c),
        _link(BACKBONE, b, d),
        _link(BACKBONE, c, d),
    )
    scenario = SimScenario(nodes=nodes, links=links, seed=seed, end_ms=20_000.0)
    scenario.validate()
    return scenario
