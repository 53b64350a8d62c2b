from __future__ import annotations

import json
import math
from itertools import pairwise
from typing import TYPE_CHECKING

import pytest

from meshanon.keymgmt import KeyListServer, generate_key_list
from meshanon.ringauth import make_directory, sign_and_initiate
from meshanon.serialize import (
    KEY_LIST_HEADER,
    KEY_REQUEST,
    SerializationError,
    decode_key_list,
    decode_key_request,
    decode_response,
    decode_signature,
    dump_scenario,
    encode_key_list,
    encode_key_request,
    encode_response,
    encode_signature,
    encode_signature_fixed,
    keypair_from_json,
    keypair_to_json,
    load_scenario,
    metrics_to_json,
    read_json,
    ring_members_from_json,
    ring_to_json,
    scenario_from_dict,
    scenario_to_dict,
    server_keys_from_json,
    server_keys_to_json,
    server_public_from_json,
    session_from_json,
    session_to_json,
    write_json,
)
from meshanon.sim import build_bootstrap_topology, build_evaluation_topology
from meshanon.types import (
    KeyList,
    KeyMode,
    Metrics,
    ScenarioError,
    ServerResponse,
)

if TYPE_CHECKING:
    from collections.abc import Callable
    from pathlib import Path

    from tests.conftest import RingSetup


def test_key_request_layout() -> None:
    assert KEY_REQUEST.size == 8
    assert encode_key_request(7, 2) == b"\x00\x00\x00\x07\x00\x00\x00\x02"
    assert decode_key_request(encode_key_request(7, 2)) == (7, 2)
    with pytest.raises(SerializationError):
        decode_key_request(b"\x00" * 7)
    with pytest.raises(SerializationError):
        encode_key_request(-1, 0)


def test_key_list_layout() -> None:
    server = KeyListServer(b"master", 10, 1000.0)
    key_list = server.list_for_session(3)
    data = encode_key_list(key_list)
    assert len(data) == KEY_LIST_HEADER.size + 10 * 32 == 338
    assert data[:8] == (30_000).to_bytes(8, "big")
    assert data[8:16] == (1000).to_bytes(8, "big")
    assert data[16:18] == (10).to_bytes(2, "big")
    decoded = decode_key_list(data)
    assert decoded == key_list
    assert decoded.session == 3


def test_key_list_decoding_errors() -> None:
    data = encode_key_list(generate_key_list(0, 0.0, 2, 10.0, b"master"))
    with pytest.raises(SerializationError):
        decode_key_list(data[:-1])
    with pytest.raises(SerializationError):
        decode_key_list(data + b"\x00")
    with pytest.raises(SerializationError):
        decode_key_list(KEY_LIST_HEADER.pack(0, 0, 0))
    with pytest.raises(SerializationError):
        encode_key_list(KeyList((b"short",), 0.0, 10.0))
    with pytest.raises(SerializationError):
        encode_key_list(generate_key_list(0, 0.5, 2, 10.0, b"master"))


def test_signature_encoding(ring_setup: Callable[..., RingSetup]) -> None:
    setup = ring_setup(3)
    sig, _ = sign_and_initiate(
        setup.ring,
        1,
        setup.pairs[1].private,
        setup.server.public,
        b"request",
        setup.cfg,
        b"encode",
    )
    data = encode_signature(sig, setup.cfg.bits)
    assert decode_signature(data, setup.cfg.bits) == sig
    with pytest.raises(SerializationError):
        decode_signature(data + b"\x00", setup.cfg.bits)
    with pytest.raises(SerializationError):
        decode_signature(data[:-1], setup.cfg.bits)
    with pytest.raises(SerializationError):
        decode_signature(b"\x02" + data[1:], setup.cfg.bits)

    fixed = encode_signature_fixed(sig, setup.cfg.bits, setup.server.group, setup.ring)
    assert len(fixed) >= len(data)
    assert decode_signature(fixed, setup.cfg.bits, strict=False) == sig


def test_fixed_width_size_is_affine(ring_setup: Callable[..., RingSetup]) -> None:
    setup = ring_setup(8, label="affine")
    sizes = []
    for n in range(1, 9):
        ring = make_directory(
            (m.member_id, m.public) for m in setup.ring.members[:n]
        )
        sig, _ = sign_and_initiate(
            ring,
            0,
            setup.pairs[0].private,
            setup.server.public,
            b"size",
            setup.cfg,
            bytes([n]),
        )
        sizes.append(
            len(encode_signature_fixed(sig, setup.cfg.bits, setup.server.group, ring))
        )
    steps = {b - a for a, b in pairwise(sizes)}
    assert len(steps) == 1


def test_response_encoding() -> None:
    resp = ServerResponse(b"h" * 32, 12345, b"i" * 32)
    assert decode_response(encode_response(resp)) == resp
    with pytest.raises(SerializationError):
        decode_response(encode_response(resp)[:-3])


def test_key_documents(tmp_path: Path, ring_setup: Callable[..., RingSetup]) -> None:
    setup = ring_setup(2)
    write_json(tmp_path / "member.json", keypair_to_json(setup.pairs[0]))
    assert keypair_from_json(read_json(tmp_path / "member.json")) == setup.pairs[0]

    private = server_keys_to_json(setup.server)
    public = server_keys_to_json(setup.server, private=False)
    assert "x_b" not in public
    assert server_keys_from_json(private) == setup.server
    assert server_public_from_json(public) == setup.server.public
    with pytest.raises(SerializationError):
        server_keys_from_json(public)

    members = ring_members_from_json(ring_to_json(setup.ring))
    assert make_directory(members) == setup.ring
    with pytest.raises(SerializationError):
        ring_members_from_json({"members": [{"id": "zz"}]})


def test_session_documents(ring_setup: Callable[..., RingSetup]) -> None:
    setup = ring_setup(2)
    _, session = sign_and_initiate(
        setup.ring,
        0,
        setup.pairs[0].private,
        setup.server.public,
        b"request",
        setup.cfg,
        b"session",
    )
    doc = json.loads(json.dumps(session_to_json(session)))
    assert session_from_json(doc) == session
    assert str(session.x_a) not in repr(session)
    with pytest.raises(SerializationError):
        session_from_json({"l": "00"})


def test_read_json_errors(tmp_path: Path) -> None:
    (tmp_path / "broken.json").write_text("{")
    (tmp_path / "list.json").write_text("[]")
    with pytest.raises(SerializationError):
        read_json(tmp_path / "broken.json")
    with pytest.raises(SerializationError):
        read_json(tmp_path / "list.json")


def test_scenario_files(tmp_path: Path) -> None:
    for scenario in (build_bootstrap_topology(), build_evaluation_topology(seed=4)):
        dump_scenario(scenario, tmp_path / "scenario.json")
        assert load_scenario(tmp_path / "scenario.json") == scenario


def test_scenario_documents_are_checked() -> None:
    doc = scenario_to_dict(build_bootstrap_topology())
    assert doc["mode"] == KeyMode.ROTATING.value
    with pytest.raises(ScenarioError):
        scenario_from_dict({**doc, "radio": "802.11s"})
    with pytest.raises(ScenarioError):
        scenario_from_dict({**doc, "mode": "sometimes"})
    with pytest.raises(ScenarioError):
        scenario_from_dict({**doc, "key": {**doc["key"], "timeout_ms": 1500.5}})
    nodes = [dict(node) for node in doc["nodes"]]
    nodes[0]["kind"] = "MR"
    with pytest.raises(ScenarioError):
        scenario_from_dict({**doc, "nodes": nodes})
    links = [*doc["links"], {"a": 1, "b": 99}]
    with pytest.raises(ScenarioError):
        scenario_from_dict({**doc, "links": links})
    with pytest.raises(ScenarioError):
        scenario_from_dict({"links": []})


def test_metrics_document() -> None:
    metrics = Metrics(KeyMode.STATIC, 3, "fp", sim_time_ms=1000.0, sent=2)
    metrics.delivered = 2
    metrics.delivered_bytes = 2000
    metrics.join_latency_ms = {1: 12.5, 2: math.inf}
    doc = json.loads(json.dumps(metrics_to_json(metrics)))
    assert doc["join_latency_ms"] == {"1": 12.5, "2": None}
    assert doc["throughput"] == 2000.0
    assert doc["dropped"] == {"no-key": 0, "in-flight-at-expiry": 0, "link-loss": 0}
