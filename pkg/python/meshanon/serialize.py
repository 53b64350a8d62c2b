"""meshanon.serialize - Wire formats and JSON documents."""

from __future__ import annotations

import json
import math
import struct
from dataclasses import fields
from pathlib import Path
from typing import TYPE_CHECKING, Any

from meshanon.groupmath import decode_int, encode_int, encode_int_fixed
from meshanon.keymgmt import KEY_BYTES
from meshanon.types.group import EncodingError, GroupParams
from meshanon.types.keylist import KeyList, KeyManagementError
from meshanon.types.ring import (
    ClientSession,
    MalformedSignatureError,
    RingSignature,
    ServerKeys,
    ServerPublic,
    ServerResponse,
)
from meshanon.types.scenario import (
    DelaySpec,
    FlowSpec,
    KeyConfig,
    KeyMode,
    LinkSpec,
    NodeKind,
    NodeSpec,
    RingConfig,
    ScenarioError,
    SimScenario,
    TrafficKind,
)
from meshanon.types.trapdoor import (
    Preimage,
    TrapdoorError,
    TrapdoorKeyPair,
    TrapdoorPrivate,
    TrapdoorPublic,
)

if TYPE_CHECKING:
    from meshanon.types.ring import RingDirectory
    from meshanon.types.scenario import Metrics

SIGNATURE_VERSION = 1
KEY_REQUEST = struct.Struct(">II")
KEY_LIST_HEADER = struct.Struct(">QQH")
_ID_PREFIX = struct.Struct(">I")
_COUNT = struct.Struct(">H")


class SerializationError(ValueError):
    """A wire message or file could not be decoded."""


class _Reader:
    """Sequential reader over a byte string."""

    def __init__(self: _Reader, data: bytes, *, strict: bool = True) -> None:
        self.data = data
        self.offset = 0
        self.strict = strict

    def take(self: _Reader, n: int) -> bytes:
        end = self.offset + n
        if end > len(self.data):
            msg = "message truncated"
            raise SerializationError(msg)
        out = self.data[self.offset : end]
        self.offset = end
        return out

    def unpack(self: _Reader, layout: struct.Struct) -> tuple[Any, ...]:
        return layout.unpack(self.take(layout.size))

    def blob(self: _Reader) -> bytes:
        (length,) = self.unpack(_ID_PREFIX)
        return self.take(length)

    def integer(self: _Reader) -> int:
        try:
            value, self.offset = decode_int(self.data, self.offset, strict=self.strict)
        except EncodingError as e:
            raise SerializationError(str(e)) from e
        return value

    def finish(self: _Reader) -> None:
        if self.offset != len(self.data):
            msg = f"{len(self.data) - self.offset} trailing bytes"
            raise SerializationError(msg)


def _blob(data: bytes) -> bytes:
    return _ID_PREFIX.pack(len(data)) + data


def _block_bytes(bits: int) -> int:
    return (bits + 7) // 8


def _signature_head(sig: RingSignature, bits: int) -> bytes:
    if not 0 <= sig.v < (1 << bits):
        msg = f"v does not fit in {bits} bits"
        raise SerializationError(msg)
    return (
        bytes([SIGNATURE_VERSION])
        + _COUNT.pack(len(sig.member_ids))
        + b"".join(_blob(member_id) for member_id in sig.member_ids)
        + sig.v.to_bytes(_block_bytes(bits), "big")
    )


def encode_signature(sig: RingSignature, bits: int) -> bytes:
    """Encode sigma with every integer in its canonical minimal form."""
    return (
        _signature_head(sig, bits)
        + encode_int(sig.big_v)
        + encode_int(sig.big_r)
        + b"".join(encode_int(pre.alpha) + encode_int(pre.beta) for pre in sig.pairs)
    )


def encode_signature_fixed(
    sig: RingSignature, bits: int, server: GroupParams, ring: RingDirectory
) -> bytes:
    """Encode sigma padding each integer to the width of its modulus.

    The length then depends only on the ring's group sizes, which makes it
    affine in n for equally sized members.
    """
    try:
        body = encode_int_fixed(sig.big_v, server.p_bytes) + encode_int_fixed(
            sig.big_r, server.p_bytes
        )
        for member_id, pre in zip(sig.member_ids, sig.pairs):
            group = ring.lookup(member_id).public.group
            body += encode_int_fixed(pre.alpha, group.p_bytes)
            body += encode_int_fixed(pre.beta, group.q_bytes)
    except EncodingError as e:
        raise SerializationError(str(e)) from e
    return _signature_head(sig, bits) + body


def decode_signature(data: bytes, bits: int, *, strict: bool = True) -> RingSignature:
    """Decode sigma; strict=False accepts the fixed-width padding."""
    reader = _Reader(data, strict=strict)
    (version,) = reader.take(1)
    if version != SIGNATURE_VERSION:
        msg = f"unsupported signature version {version}"
        raise SerializationError(msg)
    (count,) = reader.unpack(_COUNT)
    member_ids = tuple(reader.blob() for _ in range(count))
    v = int.from_bytes(reader.take(_block_bytes(bits)), "big")
    if v >= (1 << bits):
        msg = f"v does not fit in {bits} bits"
        raise SerializationError(msg)
    big_v = reader.integer()
    big_r = reader.integer()
    try:
        pairs = tuple(
            Preimage(reader.integer(), reader.integer()) for _ in range(count)
        )
        sig = RingSignature(member_ids, v, big_v, big_r, pairs)
    except (TrapdoorError, MalformedSignatureError) as e:
        raise SerializationError(str(e)) from e
    reader.finish()
    return sig


def encode_response(resp: ServerResponse) -> bytes:
    """Encode the server reply [h][Y][I']."""
    return _blob(resp.h) + encode_int(resp.big_y) + _blob(resp.i_prime)


def decode_response(data: bytes) -> ServerResponse:
    """Decode the server reply."""
    reader = _Reader(data)
    resp = ServerResponse(reader.blob(), reader.integer(), reader.blob())
    reader.finish()
    return resp


def encode_key_request(node_id: int, counter: int) -> bytes:
    """Encode a key-list request [node id][request counter]."""
    try:
        return KEY_REQUEST.pack(node_id, counter)
    except struct.error as e:
        raise SerializationError(str(e)) from e


def decode_key_request(data: bytes) -> tuple[int, int]:
    """Decode a key-list request into (node id, request counter)."""
    if len(data) != KEY_REQUEST.size:
        msg = f"key request must be {KEY_REQUEST.size} bytes"
        raise SerializationError(msg)
    node_id, counter = KEY_REQUEST.unpack(data)
    return node_id, counter


def _whole_ms(value: float, name: str) -> int:
    if value < 0 or value != int(value):
        msg = f"{name} must be a whole non-negative number of ms, got {value}"
        raise SerializationError(msg)
    return int(value)


def encode_key_list(key_list: KeyList) -> bytes:
    """Encode a key-list response [TS_KL][timeout][cardinality][keys]."""
    if any(len(key) != KEY_BYTES for key in key_list.keys):
        msg = f"keys must be {KEY_BYTES} bytes"
        raise SerializationError(msg)
    header = KEY_LIST_HEADER.pack(
        _whole_ms(key_list.ts_kl, "TS_KL"),
        _whole_ms(key_list.timeout, "timeout"),
        key_list.cardinality,
    )
    return header + b"".join(key_list.keys)


def decode_key_list(data: bytes, epoch: float = 0.0) -> KeyList:
    """Decode a key-list response.

    The session counter is not on the wire; it follows from TS_KL and the
    AS epoch.
    """
    reader = _Reader(data)
    ts_kl, timeout, cardinality = reader.unpack(KEY_LIST_HEADER)
    keys = tuple(reader.take(KEY_BYTES) for _ in range(cardinality))
    reader.finish()
    if cardinality == 0 or timeout == 0:
        msg = "key list needs keys and a positive timeout"
        raise SerializationError(msg)
    session = round((ts_kl - epoch) / (cardinality * timeout))
    try:
        return KeyList(keys, float(ts_kl), float(timeout), session)
    except KeyManagementError as e:
        raise SerializationError(str(e)) from e


def _hex_int(value: int) -> str:
    return encode_int(value).hex()


def _int_hex(doc: dict[str, Any], name: str) -> int:
    try:
        raw = bytes.fromhex(doc[name])
    except (KeyError, TypeError, ValueError) as e:
        msg = f"missing or malformed field {name!r}"
        raise SerializationError(msg) from e
    reader = _Reader(raw)
    value = reader.integer()
    reader.finish()
    return value


def group_to_json(group: GroupParams) -> dict[str, Any]:
    """Encode group parameters."""
    return {"p": _hex_int(group.p), "q": _hex_int(group.q), "g": _hex_int(group.g)}


def group_from_json(doc: dict[str, Any]) -> GroupParams:
    """Decode group parameters."""
    return GroupParams(_int_hex(doc, "p"), _int_hex(doc, "q"), _int_hex(doc, "g"))


def public_key_to_json(pub: TrapdoorPublic) -> dict[str, Any]:
    """Encode a trapdoor public key."""
    return {
        "kind": "trapdoor-public",
        "group": group_to_json(pub.group),
        "y_a": _hex_int(pub.y_a),
    }


def public_key_from_json(doc: dict[str, Any]) -> TrapdoorPublic:
    """Decode a trapdoor public key."""
    return TrapdoorPublic(group_from_json(_section(doc, "group")), _int_hex(doc, "y_a"))


def keypair_to_json(pair: TrapdoorKeyPair) -> dict[str, Any]:
    """Encode a trapdoor key pair, private exponent included."""
    doc = public_key_to_json(pair.public)
    doc["kind"] = "trapdoor-private"
    doc["x_a"] = _hex_int(pair.private.x_a)
    return doc


def keypair_from_json(doc: dict[str, Any]) -> TrapdoorKeyPair:
    """Decode a trapdoor key pair."""
    return TrapdoorKeyPair(
        public_key_from_json(doc), TrapdoorPrivate(_int_hex(doc, "x_a"))
    )


def server_keys_to_json(keys: ServerKeys, *, private: bool = True) -> dict[str, Any]:
    """Encode the server keys; private=False leaves out x_B."""
    doc: dict[str, Any] = {
        "kind": "server-private" if private else "server-public",
        "group": group_to_json(keys.group),
        "y_b": _hex_int(keys.y_b),
    }
    if private:
        doc["x_b"] = _hex_int(keys.x_b)
    return doc


def server_keys_from_json(doc: dict[str, Any]) -> ServerKeys:
    """Decode the server key pair."""
    return ServerKeys(
        group_from_json(_section(doc, "group")),
        _int_hex(doc, "x_b"),
        _int_hex(doc, "y_b"),
    )


def server_public_from_json(doc: dict[str, Any]) -> ServerPublic:
    """Decode the server's public values from either server key document."""
    return ServerPublic(group_from_json(_section(doc, "group")), _int_hex(doc, "y_b"))


def ring_to_json(ring: RingDirectory) -> dict[str, Any]:
    """Encode a ring directory."""
    return {
        "kind": "ring",
        "members": [
            {"id": member.member_id.hex(), "public": public_key_to_json(member.public)}
            for member in ring.members
        ],
    }


def ring_members_from_json(doc: dict[str, Any]) -> list[tuple[bytes, TrapdoorPublic]]:
    """Decode ring members; meshanon.ringauth.make_directory validates them."""
    try:
        return [
            (bytes.fromhex(entry["id"]), public_key_from_json(entry["public"]))
            for entry in doc["members"]
        ]
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, SerializationError):
            raise
        msg = "malformed ring document"
        raise SerializationError(msg) from e


def session_to_json(session: ClientSession) -> dict[str, Any]:
    """Encode client session state, ephemeral secrets included."""
    return {
        "kind": "client-session",
        "server": {
            "group": group_to_json(session.server.group),
            "y_b": _hex_int(session.server.y_b),
        },
        "x_i": _hex_int(session.x_i),
        "x_a": _hex_int(session.x_a),
        "X": _hex_int(session.big_x),
        "R": _hex_int(session.big_r),
        "Q": _hex_int(session.big_q),
        "V": _hex_int(session.big_v),
        "l": session.l_digest.hex(),
        "identity": session.identity.hex(),
    }


def session_from_json(doc: dict[str, Any]) -> ClientSession:
    """Decode client session state."""
    try:
        l_digest = bytes.fromhex(doc["l"])
        identity = bytes.fromhex(doc["identity"])
    except (KeyError, TypeError, ValueError) as e:
        msg = "malformed client session"
        raise SerializationError(msg) from e
    return ClientSession(
        server_public_from_json(_section(doc, "server")),
        _int_hex(doc, "x_i"),
        _int_hex(doc, "x_a"),
        _int_hex(doc, "X"),
        _int_hex(doc, "R"),
        _int_hex(doc, "Q"),
        _int_hex(doc, "V"),
        l_digest,
        identity,
    )


def _section(doc: dict[str, Any], name: str) -> dict[str, Any]:
    section = doc.get(name) if isinstance(doc, dict) else None
    if not isinstance(section, dict):
        msg = f"missing section {name!r}"
        raise SerializationError(msg)
    return section


def write_json(path: Path, doc: dict[str, Any]) -> None:
    """Write a JSON document with a stable layout."""
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_json(path: Path) -> dict[str, Any]:
    """Read a JSON object from a file."""
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        msg = f"{path} is not valid JSON"
        raise SerializationError(msg) from e
    if not isinstance(doc, dict):
        msg = f"{path} does not hold a JSON object"
        raise SerializationError(msg)
    return doc


def _kwargs(doc: Any, cls: type, where: str) -> dict[str, Any]:  # noqa: ANN401
    if not isinstance(doc, dict):
        msg = f"{where} must be an object"
        raise ScenarioError(msg)
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(doc) - known)
    if unknown:
        msg = f"unknown keys in {where}: {', '.join(unknown)}"
        raise ScenarioError(msg)
    return dict(doc)


def _delay(doc: Any, where: str) -> DelaySpec:  # noqa: ANN401
    return DelaySpec(**_kwargs(doc, DelaySpec, where))


def _enum(cls: type[Any], value: Any, where: str) -> Any:  # noqa: ANN401
    try:
        return cls(value)
    except ValueError as e:
        msg = f"bad value {value!r} for {where}"
        raise ScenarioError(msg) from e


def scenario_from_dict(doc: dict[str, Any]) -> SimScenario:
    """Build a scenario from its JSON document and validate it."""
    top = _kwargs(doc, SimScenario, "scenario")
    try:
        nodes = []
        for i, raw in enumerate(top.pop("nodes")):
            node = _kwargs(raw, NodeSpec, f"nodes[{i}]")
            node["kind"] = _enum(NodeKind, node["kind"], f"nodes[{i}].kind")
            if "key_response_delay" in node:
                node["key_response_delay"] = _delay(
                    node["key_response_delay"], f"nodes[{i}].key_response_delay"
                )
            nodes.append(NodeSpec(**node))
        links = []
        for i, raw in enumerate(top.pop("links")):
            link = _kwargs(raw, LinkSpec, f"links[{i}]")
            if "delay" in link:
                link["delay"] = _delay(link["delay"], f"links[{i}].delay")
            links.append(LinkSpec(**link))
        flows = []
        for i, raw in enumerate(top.pop("flows", [])):
            flow = _kwargs(raw, FlowSpec, f"flows[{i}]")
            if "kind" in flow:
                flow["kind"] = _enum(TrafficKind, flow["kind"], f"flows[{i}].kind")
            flows.append(FlowSpec(**flow))
        if "key" in top:
            top["key"] = KeyConfig(**_kwargs(top["key"], KeyConfig, "key"))
        if "ring" in top:
            top["ring"] = RingConfig(**_kwargs(top["ring"], RingConfig, "ring"))
        if "mode" in top:
            top["mode"] = _enum(KeyMode, top["mode"], "mode")
        scenario = SimScenario(
            nodes=tuple(nodes), links=tuple(links), flows=tuple(flows), **top
        )
    except (KeyError, TypeError) as e:
        msg = f"incomplete scenario: {e}"
        raise ScenarioError(msg) from e
    scenario.validate()
    return scenario


def _plain(value: Any) -> Any:  # noqa: ANN401
    if isinstance(value, (NodeKind, TrafficKind, KeyMode)):
        return value.value
    if isinstance(value, (tuple, list)):
        return [_plain(item) for item in value]
    if hasattr(value, "__dataclass_fields__"):
        return {f.name: _plain(getattr(value, f.name)) for f in fields(value)}
    return value


def scenario_to_dict(scenario: SimScenario) -> dict[str, Any]:
    """Convert a scenario to its JSON document."""
    doc = _plain(scenario)
    assert isinstance(doc, dict)  # noqa: S101
    return doc


def load_scenario(path: Path) -> SimScenario:
    """Read and validate a scenario file."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        msg = f"{path} is not valid JSON"
        raise ScenarioError(msg) from e
    return scenario_from_dict(doc)


def dump_scenario(scenario: SimScenario, path: Path) -> None:
    """Write a scenario file."""
    write_json(Path(path), scenario_to_dict(scenario))


def _finite(value: float) -> float | None:
    return None if math.isinf(value) else value


def metrics_to_json(metrics: Metrics) -> dict[str, Any]:
    """Convert Metrics to a JSON document; never-joined nodes get null latency."""
    return {
        "mode": metrics.mode.value,
        "seed": metrics.seed,
        "fingerprint": metrics.fingerprint,
        "sim_time_ms": metrics.sim_time_ms,
        "sent": metrics.sent,
        "delivered": metrics.delivered,
        "dropped": {cause.value: count for cause, count in metrics.dropped.items()},
        "total_dropped": metrics.total_dropped,
        "in_flight": metrics.in_flight,
        "delivered_bytes": metrics.delivered_bytes,
        "throughput": metrics.throughput,
        "drop_rate": metrics.drop_rate,
        "retransmissions": metrics.retransmissions,
        "key_requests": metrics.key_requests,
        "auth_rejects": metrics.auth_rejects,
        "key_outage_ms": {str(k): v for k, v in sorted(metrics.key_outage_ms.items())},
        "join_latency_ms": {
            str(k): _finite(v) for k, v in sorted(metrics.join_latency_ms.items())
        },
        "signature_bytes": list(metrics.signature_bytes),
    }
