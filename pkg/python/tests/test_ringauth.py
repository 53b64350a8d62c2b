from __future__ import annotations

import random
from dataclasses import replace
from typing import TYPE_CHECKING

import pytest
from scipy import stats

from meshanon.groupmath import encode_int, mod_exp, mod_inv
from meshanon.ringauth import (
    AuthServer,
    client_confirm,
    combine,
    hash_h,
    make_directory,
    prp_forward,
    prp_inverse,
    server_verify_and_respond,
    sign_and_initiate,
    solve_ring_gap,
)
from meshanon.serialize import (
    SIGNATURE_VERSION,
    SerializationError,
    decode_signature,
    encode_signature,
)
from meshanon.types import (
    ClientAccept,
    CombiningConfig,
    CombiningWidthError,
    DomainError,
    FeistelPermutation,
    GroupParams,
    MalformedSignatureError,
    Preimage,
    Reject,
    RingSignature,
    ServerAccept,
    ServerResponse,
    TrapdoorPublic,
    XorPermutation,
)
from meshanon.util import derive_seed

if TYPE_CHECKING:
    from collections.abc import Callable

    from meshanon.types import ClientSession
    from tests.conftest import RingSetup

XOR4 = CombiningConfig(4, XorPermutation())
KEY3 = b"\x03"


def _sign(
    setup: RingSetup,
    signer: int,
    seed: bytes,
    identity: bytes = b"request",
    cfg: CombiningConfig | None = None,
) -> tuple[RingSignature, ClientSession]:
    return sign_and_initiate(
        setup.ring,
        signer,
        setup.pairs[signer].private,
        setup.server.public,
        identity,
        cfg or setup.cfg,
        seed,
    )


def _run(
    setup: RingSetup, signer: int, seed: bytes
) -> tuple[ServerAccept | Reject, ClientAccept | Reject | None]:
    sig, session = _sign(setup, signer, seed)
    verdict = server_verify_and_respond(
        setup.server, setup.ring, sig, b"request", setup.cfg, seed + b"server"
    )
    if isinstance(verdict, Reject):
        return verdict, None
    return verdict, client_confirm(session, verdict.response)


def _accepted(
    setup: RingSetup, sig: RingSignature, identity: bytes = b"request"
) -> bool:
    try:
        verdict = server_verify_and_respond(
            setup.server, setup.ring, sig, identity, setup.cfg, b"server"
        )
    except MalformedSignatureError:
        return False
    return isinstance(verdict, ServerAccept)


def test_xor_permutation_examples() -> None:
    assert prp_forward(XOR4, KEY3, 6) == 5
    assert prp_inverse(XOR4, KEY3, 5) == 6
    with pytest.raises(CombiningWidthError):
        prp_forward(XOR4, KEY3, 16)


def test_feistel_is_a_permutation() -> None:
    for bits in (8, 9):
        cfg = CombiningConfig(bits)
        outputs = [prp_forward(cfg, b"key", m) for m in range(1 << bits)]
        assert sorted(outputs) == list(range(1 << bits))
        for m, out in enumerate(outputs):
            assert prp_inverse(cfg, b"key", out) == m


def test_feistel_needs_even_rounds() -> None:
    with pytest.raises(DomainError):
        FeistelPermutation(3)


def test_combine_examples() -> None:
    assert combine(XOR4, KEY3, 5, [3]) == 5
    assert combine(XOR4, KEY3, 5, []) == 5
    assert combine(XOR4, KEY3, 5, [9, 9]) == 5
    with pytest.raises(CombiningWidthError):
        combine(XOR4, KEY3, 5, [17])


def test_solve_ring_gap_examples() -> None:
    assert solve_ring_gap(XOR4, KEY3, 5, [9], []) == 9
    assert solve_ring_gap(XOR4, KEY3, 5, [], [9]) == 9
    y = solve_ring_gap(XOR4, KEY3, 5, [], [])
    assert prp_forward(XOR4, KEY3, y ^ 5) == 5


def test_solve_ring_gap_closes_the_ring() -> None:
    cfg = CombiningConfig(32)
    rng = random.Random(0)
    for n in range(1, 8):
        ys = [rng.getrandbits(32) for _ in range(n)]
        v = rng.getrandbits(32)
        for gap in range(n):
            before, after = ys[:gap], ys[gap + 1 :]
            y = solve_ring_gap(cfg, b"link", v, before, after)
            assert combine(cfg, b"link", v, [*before, y, *after]) == v


def test_ring_equation_count() -> None:
    cfg = CombiningConfig(8)
    v = 0x5A
    solutions = sum(
        1
        for y1 in range(256)
        for y2 in range(256)
        if combine(cfg, b"count", v, [y1, y2]) == v
    )
    assert solutions == 256


def test_hash_framing() -> None:
    assert hash_h([b"ab", b"c"]) == hash_h([b"ab", b"c"])
    assert hash_h([b"ab", b"c"]) != hash_h([b"a", b"bc"])
    assert len(hash_h([])) == len(hash_h([b"x" * 1000])) == 32


def test_make_directory_checks_members(toy_group: GroupParams) -> None:
    with pytest.raises(DomainError):
        make_directory([(b"a", TrapdoorPublic(toy_group, 5))])
    with pytest.raises(DomainError):
        make_directory([(b"a", TrapdoorPublic(GroupParams(23, 11, 1), 1))])
    with pytest.raises(DomainError):
        make_directory([])
    members = [
        (b"a", TrapdoorPublic(toy_group, 18)),
        (b"b", TrapdoorPublic(toy_group, 4)),
    ]
    assert make_directory(members).member_ids == (b"a", b"b")
    with pytest.raises(DomainError):
        make_directory(members * 2)


def test_single_member_ring(ring_setup: Callable[..., RingSetup]) -> None:
    server, client = _run(ring_setup(1), 0, b"alone")
    assert isinstance(server, ServerAccept)
    assert isinstance(client, ClientAccept)
    assert client.session_key == server.session_key


@pytest.mark.parametrize("n", [1, 2, 5, 10, 20])
def test_completeness(ring_setup: Callable[..., RingSetup], n: int) -> None:
    setup = ring_setup(n)
    for signer in range(n):
        for trial in range(3):
            server, client = _run(setup, signer, derive_seed(b"c", n, signer, trial))
            assert isinstance(server, ServerAccept)
            assert isinstance(client, ClientAccept)
            assert client.session_key == server.session_key


@pytest.mark.slow
@pytest.mark.parametrize("n", [1, 2, 5, 10, 20])
def test_completeness_at_scale(ring_setup: Callable[..., RingSetup], n: int) -> None:
    setup = ring_setup(n)
    for signer in range(n):
        for trial in range(50):
            server, client = _run(setup, signer, derive_seed(b"s", n, signer, trial))
            assert isinstance(server, ServerAccept)
            assert isinstance(client, ClientAccept)
            assert client.session_key == server.session_key


def test_tiny_ring_completeness(ring_setup: Callable[..., RingSetup]) -> None:
    setup = ring_setup(5, 16, 8, "tiny")
    for signer in range(5):
        server, client = _run(setup, signer, derive_seed(b"tiny", signer))
        assert isinstance(server, ServerAccept)
        assert isinstance(client, ClientAccept)
        assert client.session_key == server.session_key


def test_toy_diffie_hellman_agreement() -> None:
    # X = 4^3 = 18 and Y = 4^2 = 16 give the same key on both sides
    assert mod_exp(16, 3, 23) == mod_exp(18, 2, 23) == 2


def test_signing_is_deterministic(ring_setup: Callable[..., RingSetup]) -> None:
    setup = ring_setup(5)
    assert _sign(setup, 2, b"seed")[0] == _sign(setup, 2, b"seed")[0]
    assert _sign(setup, 2, b"seed")[0] != _sign(setup, 2, b"other")[0]


def test_signer_must_hold_its_key(ring_setup: Callable[..., RingSetup]) -> None:
    setup = ring_setup(5)
    for index in (1, 5, -1):
        with pytest.raises(DomainError):
            sign_and_initiate(
                setup.ring,
                index,
                setup.pairs[2].private,
                setup.server.public,
                b"request",
                setup.cfg,
                b"seed",
            )


def test_narrow_block_width_is_refused(ring_setup: Callable[..., RingSetup]) -> None:
    with pytest.raises(DomainError):
        _sign(ring_setup(2), 0, b"seed", cfg=CombiningConfig(32))


def test_client_and_server_agree_on_q(ring_setup: Callable[..., RingSetup]) -> None:
    setup = ring_setup(3)
    group = setup.server.group
    for trial in range(20):
        _, session = _sign(setup, trial % 3, derive_seed(b"q", trial))
        server_q = mod_exp(session.big_r, setup.server.x_b, group.p) % group.q
        assert server_q == session.big_q


def _signature_mutations(
    sig: RingSignature, rng: random.Random, bits: int
) -> list[RingSignature]:
    mutants = []
    for _ in range(20):
        t = rng.randrange(len(sig.pairs))
        pre = sig.pairs[t]
        flipped = pre.alpha ^ (1 << rng.randrange(pre.alpha.bit_length()))
        if flipped:
            pairs = list(sig.pairs)
            pairs[t] = Preimage(flipped, pre.beta)
            mutants.append(replace(sig, pairs=tuple(pairs)))
        pairs = list(sig.pairs)
        pairs[t] = Preimage(pre.alpha, pre.beta ^ (1 << rng.randrange(8)))
        mutants.append(replace(sig, pairs=tuple(pairs)))
        mutants.append(replace(sig, v=sig.v ^ (1 << rng.randrange(bits))))
        mutants.append(replace(sig, big_v=sig.big_v ^ (1 << rng.randrange(16))))
        mutants.append(replace(sig, big_r=sig.big_r ^ (1 << rng.randrange(16))))
    return mutants


def test_signature_mutations_are_rejected(
    ring_setup: Callable[..., RingSetup],
) -> None:
    setup = ring_setup(5)
    rng = random.Random(1)
    for signer in range(5):
        sig, _ = _sign(setup, signer, derive_seed(b"m", signer))
        assert _accepted(setup, sig)
        for mutant in _signature_mutations(sig, rng, setup.cfg.bits):
            assert not _accepted(setup, mutant)


def test_forged_preimages_are_rejected(ring_setup: Callable[..., RingSetup]) -> None:
    setup = ring_setup(5)
    rng = random.Random(2)
    sig, _ = _sign(setup, 0, b"forge")
    for _ in range(50):
        pairs = tuple(
            Preimage(rng.randrange(1, g.p), rng.randrange(g.q))
            for g in (m.public.group for m in setup.ring.members)
        )
        assert not _accepted(setup, replace(sig, pairs=pairs))


def test_structural_faults_raise(ring_setup: Callable[..., RingSetup]) -> None:
    setup = ring_setup(3)
    sig, _ = _sign(setup, 0, b"structure")
    too_wide = Preimage(setup.ring.members[0].public.group.p, 0)
    broken = [
        replace(sig, member_ids=(b"nobody", *sig.member_ids[1:])),
        replace(sig, member_ids=(sig.member_ids[1], *sig.member_ids[1:])),
        replace(sig, member_ids=sig.member_ids[::-1], pairs=sig.pairs[::-1]),
        replace(sig, member_ids=sig.member_ids[:2], pairs=sig.pairs[:2]),
        replace(sig, v=1 << setup.cfg.bits),
        replace(sig, big_r=0),
        replace(sig, big_v=setup.server.group.p),
        replace(sig, pairs=(too_wide, *sig.pairs[1:])),
    ]
    for mutant in broken:
        with pytest.raises(MalformedSignatureError):
            server_verify_and_respond(
                setup.server, setup.ring, mutant, b"request", setup.cfg, b"s"
            )
    with pytest.raises(MalformedSignatureError):
        replace(sig, pairs=sig.pairs[1:])


def test_response_mutations_are_rejected(
    ring_setup: Callable[..., RingSetup],
) -> None:
    setup = ring_setup(3)
    rng = random.Random(3)
    sig, session = _sign(setup, 1, b"response")
    verdict = server_verify_and_respond(
        setup.server, setup.ring, sig, b"request", setup.cfg, b"server"
    )
    assert isinstance(verdict, ServerAccept)
    resp = verdict.response
    assert isinstance(client_confirm(session, resp), ClientAccept)
    for _ in range(100):
        h = bytearray(resp.h)
        h[rng.randrange(len(h))] ^= 1 << rng.randrange(8)
        mutants = [
            replace(resp, h=bytes(h)),
            replace(resp, big_y=resp.big_y ^ (1 << rng.randrange(64))),
            replace(resp, i_prime=bytes(h)),
        ]
        for mutant in mutants:
            assert isinstance(client_confirm(session, mutant), Reject)
    substituted = ServerResponse(resp.h, setup.server.y_b, resp.i_prime)
    assert isinstance(client_confirm(session, substituted), Reject)


def _memberless_signature(setup: RingSetup) -> RingSignature:
    """Signature with no ring members, built from an outsider's exponents."""
    group = setup.server.group
    p, q, g = group.p, group.q, group.g
    big_r = mod_exp(g, 5, p)
    big_x = mod_exp(g, 7, p)
    big_q = mod_exp(setup.server.y_b, 5, p) % q
    big_v = big_x * mod_inv(mod_exp(g, big_q, p), p) % p
    template, _ = _sign(setup, 0, b"memberless")
    forged = replace(template, v=0, big_v=big_v, big_r=big_r)
    # skips the constructor checks, like a hand-built object would
    object.__setattr__(forged, "member_ids", ())
    object.__setattr__(forged, "pairs", ())
    return forged


def test_signature_without_members_is_refused(
    ring_setup: Callable[..., RingSetup],
) -> None:
    setup = ring_setup(3)
    forged = _memberless_signature(setup)
    with pytest.raises(MalformedSignatureError):
        RingSignature((), forged.v, forged.big_v, forged.big_r, ())
    with pytest.raises(MalformedSignatureError):
        server_verify_and_respond(
            setup.server, setup.ring, forged, b"request", setup.cfg, b"s"
        )
    server = AuthServer(setup.server, setup.ring, seed=b"as")
    with pytest.raises(MalformedSignatureError):
        server.handle(forged, b"request")
    assert not server.has_seen(b"request")

    wire = (
        bytes([SIGNATURE_VERSION])
        + (0).to_bytes(2, "big")
        + bytes((setup.cfg.bits + 7) // 8)
        + encode_int(forged.big_v)
        + encode_int(forged.big_r)
    )
    with pytest.raises(SerializationError):
        decode_signature(wire, setup.cfg.bits)


def _every_field_mutation(
    sig: RingSignature, rng: random.Random, setup: RingSetup
) -> list[tuple[RingSignature, bytes]]:
    """One mutant per sigma field, paired with the identity to verify under."""
    p_bits = setup.server.group.p.bit_length()
    t = rng.randrange(len(sig.pairs))
    pre = sig.pairs[t]
    alpha = list(sig.pairs)
    flipped = pre.alpha ^ (1 << rng.randrange(pre.alpha.bit_length()))
    alpha[t] = Preimage(flipped or pre.alpha ^ 3, pre.beta)
    beta = list(sig.pairs)
    beta[t] = Preimage(pre.alpha, pre.beta ^ (1 << rng.randrange(8)))
    order = list(range(len(sig.member_ids)))
    while order == sorted(order):
        rng.shuffle(order)
    ids = list(sig.member_ids)
    ids[t] = rng.randbytes(9)
    identity = bytearray(b"request")
    identity[rng.randrange(len(identity))] ^= 1 << rng.randrange(8)
    return [
        (replace(sig, pairs=tuple(alpha)), b"request"),
        (replace(sig, pairs=tuple(beta)), b"request"),
        (replace(sig, v=sig.v ^ (1 << rng.randrange(setup.cfg.bits))), b"request"),
        (replace(sig, big_v=sig.big_v ^ (1 << rng.randrange(p_bits))), b"request"),
        (replace(sig, big_r=sig.big_r ^ (1 << rng.randrange(p_bits))), b"request"),
        (
            replace(
                sig,
                member_ids=tuple(sig.member_ids[i] for i in order),
                pairs=tuple(sig.pairs[i] for i in order),
            ),
            b"request",
        ),
        (replace(sig, member_ids=tuple(ids)), b"request"),
        (sig, bytes(identity)),
    ]


def _flip(data: bytes, rng: random.Random) -> bytes:
    flipped = bytearray(data)
    flipped[rng.randrange(len(flipped))] ^= 1 << rng.randrange(8)
    return bytes(flipped)


@pytest.mark.slow
def test_ten_thousand_mutations_are_rejected(
    ring_setup: Callable[..., RingSetup],
) -> None:
    setup = ring_setup(5)
    rng = random.Random(4)
    y_bits = setup.server.group.p.bit_length()
    rejected = 0
    for signer in range(5):
        sig, session = _sign(setup, signer, derive_seed(b"soundness", signer))
        verdict = server_verify_and_respond(
            setup.server, setup.ring, sig, b"request", setup.cfg, b"server"
        )
        assert isinstance(verdict, ServerAccept)
        resp = verdict.response
        for _ in range(200):
            for mutant, identity in _every_field_mutation(sig, rng, setup):
                assert not _accepted(setup, mutant, identity)
                rejected += 1
            for bad in (
                replace(resp, h=_flip(resp.h, rng)),
                replace(resp, big_y=resp.big_y ^ (1 << rng.randrange(y_bits))),
                replace(resp, i_prime=_flip(resp.i_prime, rng)),
            ):
                assert isinstance(client_confirm(session, bad), Reject)
                rejected += 1
        assert not _accepted(setup, _memberless_signature(setup))
        rejected += 1
    assert rejected >= 10_000


def test_session_keys_are_fresh(ring_setup: Callable[..., RingSetup]) -> None:
    setup = ring_setup(2)
    keys = set()
    for trial in range(200):
        _, client = _run(setup, trial % 2, derive_seed(b"fresh", trial))
        assert isinstance(client, ClientAccept)
        keys.add(client.session_key)
    assert len(keys) == 200


def _field_samples(setup: RingSetup, signer: int, count: int) -> list[list[float]]:
    """Serialized sigma fields, one column per field position."""
    rows = []
    for trial in range(count):
        sig, _ = _sign(setup, signer, derive_seed(b"anon", signer, trial))
        row = [sig.v, sig.big_v, sig.big_r]
        for pre in sig.pairs:
            row += [pre.alpha, pre.beta]
        rows.append([float(value) for value in row])
    return [list(column) for column in zip(*rows)]


def test_signer_index_is_not_distinguishable(
    ring_setup: Callable[..., RingSetup],
) -> None:
    setup = ring_setup(5)
    first = _field_samples(setup, 0, 200)
    second = _field_samples(setup, 3, 200)
    threshold = 0.01 / len(first)
    for a, b in zip(first, second):
        assert stats.ks_2samp(a, b).pvalue > threshold


@pytest.mark.slow
def test_signer_index_is_not_distinguishable_at_scale(
    ring_setup: Callable[..., RingSetup],
) -> None:
    setup = ring_setup(5)
    samples = [_field_samples(setup, signer, 500) for signer in range(5)]
    threshold = 0.01 / len(samples[0])
    for i in range(5):
        for j in range(i + 1, 5):
            for a, b in zip(samples[i], samples[j]):
                assert stats.ks_2samp(a, b).pvalue > threshold


def test_signature_layout_ignores_signer(ring_setup: Callable[..., RingSetup]) -> None:
    setup = ring_setup(4, label="layout")
    # version, member count, then four length-prefixed 9-byte identifiers
    head = 1 + 2 + 4 * (4 + 9)
    heads = set()
    for signer in range(4):
        sig, _ = _sign(setup, signer, derive_seed(b"layout", signer))
        assert sig.member_ids == setup.ring.member_ids
        heads.add(encode_signature(sig, setup.cfg.bits)[:head])
    assert len(heads) == 1


def test_auth_server_rejects_replays(ring_setup: Callable[..., RingSetup]) -> None:
    setup = ring_setup(3)
    server = AuthServer(setup.server, setup.ring, seed=b"as", window=2)
    signed = {
        identity: _sign(setup, 0, identity, identity)[0]
        for identity in (b"one", b"two", b"three")
    }
    assert isinstance(server.handle(signed[b"one"], b"one"), ServerAccept)
    assert server.has_seen(b"one")
    assert isinstance(server.handle(signed[b"one"], b"one"), Reject)
    assert isinstance(server.handle(signed[b"two"], b"two"), ServerAccept)
    assert isinstance(server.handle(signed[b"three"], b"three"), ServerAccept)
    # a window of two has evicted the oldest identity
    assert not server.has_seen(b"one")
    assert isinstance(server.handle(signed[b"one"], b"one"), ServerAccept)


def test_auth_server_does_not_record_rejects(
    ring_setup: Callable[..., RingSetup],
) -> None:
    setup = ring_setup(3)
    server = AuthServer(setup.server, setup.ring)
    sig, _ = _sign(setup, 0, b"seed", b"id")
    assert isinstance(server.handle(sig, b"other"), Reject)
    assert not server.has_seen(b"other")
    assert isinstance(server.handle(sig, b"id"), ServerAccept)


def test_auth_server_window_must_be_positive(
    ring_setup: Callable[..., RingSetup],
) -> None:
    setup = ring_setup(1)
    with pytest.raises(DomainError):
        AuthServer(setup.server, setup.ring, window=0)
