"""meshanon.ringauth - Ring signature and three-round anonymous key exchange.

A user signs on behalf of a ring of n trapdoor key holders while agreeing on
a Diffie-Hellman session key with the authentication server. The server
learns that some ring member signed, but not which one.
"""

from __future__ import annotations

import hashlib
import hmac
import logging
import threading
from collections import OrderedDict
from typing import TYPE_CHECKING

from meshanon.groupmath import (
    encode_int,
    is_in_subgroup,
    is_valid_group,
    mod_exp,
    mod_inv,
)
from meshanon.trapdoor import check_pairing, f_eval, f_invert
from meshanon.types.group import DomainError
from meshanon.types.permutation import CombiningConfig
from meshanon.types.ring import (
    ClientAccept,
    ClientSession,
    MalformedSignatureError,
    Reject,
    RingDirectory,
    RingMember,
    RingSignature,
    ServerAccept,
    ServerKeys,
    ServerResponse,
    SigningError,
)
from meshanon.types.trapdoor import Preimage
from meshanon.util import DeterministicStream, derive_seed

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    from meshanon.types.group import GroupParams
    from meshanon.types.ring import ServerPublic
    from meshanon.types.trapdoor import TrapdoorPrivate, TrapdoorPublic

log = logging.getLogger(__name__)

HASH_BYTES = 32
SIGNING_RETRIES = 64
DEFAULT_REPLAY_WINDOW = 4096


def hash_h(parts: Iterable[bytes]) -> bytes:
    """SHA-256 over the parts, each prefixed with its 4-byte length."""
    digest = hashlib.sha256()
    for part in parts:
        digest.update(len(part).to_bytes(4, "big"))
        digest.update(part)
    return digest.digest()


def prp_forward(cfg: CombiningConfig, key: bytes, block: int) -> int:
    """Apply E_k to a b-bit block."""
    cfg.check_block(block)
    return cfg.permutation.forward(key, block, cfg.bits)


def prp_inverse(cfg: CombiningConfig, key: bytes, block: int) -> int:
    """Apply the inverse of E_k to a b-bit block."""
    cfg.check_block(block)
    return cfg.permutation.inverse(key, block, cfg.bits)


def combine(cfg: CombiningConfig, key: bytes, v: int, ys: Iterable[int]) -> int:
    """Chain z_t = E_k(y_t xor z_(t-1)) from z_0 = v and return the last z."""
    z = v
    cfg.check_block(z)
    for y in ys:
        cfg.check_block(y)
        z = prp_forward(cfg, key, y ^ z)
    return z


def solve_ring_gap(
    cfg: CombiningConfig,
    key: bytes,
    v: int,
    ys_before: Sequence[int],
    ys_after: Sequence[int],
) -> int:
    """Return the unique y that closes the ring equation at the gap."""
    z = combine(cfg, key, v, ys_before)
    w = v
    for y in reversed(ys_after):
        cfg.check_block(y)
        w = prp_inverse(cfg, key, w) ^ y
    return prp_inverse(cfg, key, w) ^ z


def make_directory(
    members: Iterable[tuple[bytes, TrapdoorPublic]],
) -> RingDirectory:
    """Build a RingDirectory, checking every member's group and public key."""
    built = []
    for member_id, public in members:
        if not is_valid_group(public.group):
            msg = f"member {member_id!r} has an invalid group"
            raise DomainError(msg)
        if not is_in_subgroup(public.group, public.y_a):
            msg = f"member {member_id!r} public key is outside its subgroup"
            raise DomainError(msg)
        built.append(RingMember(member_id, public))
    return RingDirectory(tuple(built))


def gen_server_keys(group: GroupParams, seed: bytes) -> ServerKeys:
    """Draw the server exponent x_B from [1, q) and derive y_B."""
    if not is_valid_group(group):
        msg = f"invalid group {group}"
        raise DomainError(msg)
    x_b = DeterministicStream(seed, b"server-keygen").randrange(1, group.q)
    return ServerKeys(group, x_b, mod_exp(group.g, x_b, group.p))


def _link_digest(
    big_x: int, big_q: int, big_v: int, y_b: int, identity: bytes
) -> bytes:
    return hash_h(
        [
            encode_int(big_x),
            encode_int(big_q),
            encode_int(big_v),
            encode_int(y_b),
            identity,
        ]
    )


def _confirmation_digest(
    session_key: int, big_x: int, big_y: int, identity: bytes
) -> bytes:
    return hash_h(
        [encode_int(session_key), encode_int(big_x), encode_int(big_y), identity]
    )


def sign_and_initiate(  # noqa: PLR0913
    ring: RingDirectory,
    signer_index: int,
    signer_priv: TrapdoorPrivate,
    server_pub: ServerPublic,
    identity: bytes,
    cfg: CombiningConfig,
    seed: bytes,
) -> tuple[RingSignature, ClientSession]:
    """Round 1: sign on behalf of the ring and start the key exchange.

    signer_index is the 0-based position of the signer in the ring.
    """
    if not 0 <= signer_index < len(ring):
        msg = f"signer index {signer_index} outside a ring of {len(ring)}"
        raise DomainError(msg)
    signer = ring.members[signer_index].public
    if not check_pairing(signer, signer_priv):
        msg = "private key does not pair with the signer's ring entry"
        raise DomainError(msg)
    cfg.check_ring(ring)

    stream = DeterministicStream(seed, b"ring-sign")
    group = server_pub.group
    p, q, g = group.p, group.q, group.g
    x_i = stream.randrange(1, q)
    x_a = stream.randrange(1, q)
    big_r = mod_exp(g, x_i, p)
    big_q = mod_exp(server_pub.y_b, x_i, p) % q
    big_x = mod_exp(g, x_a, p)
    big_v = big_x * mod_inv(mod_exp(g, big_q, p), p) % p
    key = _link_digest(big_x, big_q, big_v, server_pub.y_b, identity)

    pairs: list[Preimage | None] = []
    ys: list[int] = []
    for index, member in enumerate(ring.members):
        if index == signer_index:
            pairs.append(None)
            ys.append(0)
            continue
        member_group = member.public.group
        pre = Preimage(
            stream.randrange(1, member_group.p), stream.randrange(0, member_group.q)
        )
        pairs.append(pre)
        ys.append(f_eval(member.public, pre))

    before, after = ys[:signer_index], ys[signer_index + 1 :]
    for attempt in range(SIGNING_RETRIES):
        v = stream.randbits(cfg.bits)
        y_i = solve_ring_gap(cfg, key, v, before, after)
        if 1 <= y_i < signer.group.p:
            blinding = stream.randrange(0, signer.group.q)
            pairs[signer_index] = f_invert(signer, signer_priv, y_i, blinding)
            break
        log.debug("gap value outside the signer's range, retry %d", attempt + 1)
    else:
        msg = f"ring equation not solvable in range after {SIGNING_RETRIES} tries"
        raise SigningError(msg)

    signature = RingSignature(
        ring.member_ids,
        v,
        big_v,
        big_r,
        tuple(pre for pre in pairs if pre is not None),
    )
    session = ClientSession(
        server_pub, x_i, x_a, big_x, big_r, big_q, big_v, key, identity
    )
    return signature, session


def _check_structure(
    group: GroupParams,
    ring: RingDirectory,
    sig: RingSignature,
    cfg: CombiningConfig,
) -> list[RingMember]:
    if sig.member_ids != ring.member_ids or len(sig.pairs) != len(ring):
        msg = "signature members do not match the ring directory"
        raise MalformedSignatureError(msg)
    members = list(ring.members)
    if not 0 <= sig.v < (1 << cfg.bits):
        msg = f"v does not fit in {cfg.bits} bits"
        raise MalformedSignatureError(msg)
    for name, value in (("V", sig.big_v), ("R", sig.big_r)):
        if not 1 <= value < group.p:
            msg = f"{name} outside [1, p)"
            raise MalformedSignatureError(msg)
    for member, pre in zip(members, sig.pairs):
        member_group = member.public.group
        if not 1 <= pre.alpha < member_group.p or not 0 <= pre.beta < member_group.q:
            msg = f"preimage of member {member.member_id!r} out of range"
            raise MalformedSignatureError(msg)
        if member_group.p >= (1 << cfg.bits):
            msg = f"member {member.member_id!r} does not embed in {cfg.bits} bits"
            raise MalformedSignatureError(msg)
    return members


def server_verify_and_respond(  # noqa: PLR0913
    keys: ServerKeys,
    ring: RingDirectory,
    sig: RingSignature,
    identity: bytes,
    cfg: CombiningConfig,
    seed: bytes,
) -> ServerAccept | Reject:
    """Round 2: recover X, verify the ring equation and answer with {h, Y, I'}.

    A structurally broken signature raises MalformedSignatureError; one that
    merely fails verification yields a Reject.
    """
    group = keys.group
    p, q, g = group.p, group.q, group.g
    members = _check_structure(group, ring, sig, cfg)
    if not is_in_subgroup(group, sig.big_v) or not is_in_subgroup(group, sig.big_r):
        return _reject("V or R outside the server subgroup")

    big_q = mod_exp(sig.big_r, keys.x_b, p) % q
    big_x = sig.big_v * mod_exp(g, big_q, p) % p
    key = _link_digest(big_x, big_q, sig.big_v, keys.y_b, identity)
    ys = [f_eval(member.public, pre) for member, pre in zip(members, sig.pairs)]
    if combine(cfg, key, sig.v, ys) != sig.v:
        return _reject("ring equation does not close")

    x_b = DeterministicStream(seed, b"server-respond").randrange(1, q)
    big_y = mod_exp(g, x_b, p)
    session_key = mod_exp(big_x, x_b, p)
    response = ServerResponse(
        _confirmation_digest(session_key, big_x, big_y, identity),
        big_y,
        hash_h([identity]),
    )
    return ServerAccept(response, session_key)


def client_confirm(
    session: ClientSession, resp: ServerResponse
) -> ClientAccept | Reject:
    """Round 3: derive K_s' and check the server's confirmation digest."""
    group = session.server.group
    if not is_in_subgroup(group, resp.big_y):
        return _reject("Y outside the server subgroup")
    if not hmac.compare_digest(resp.i_prime, hash_h([session.identity])):
        return _reject("acknowledgment does not match the request identity")
    session_key = mod_exp(resp.big_y, session.x_a, group.p)
    expected = _confirmation_digest(
        session_key, session.big_x, resp.big_y, session.identity
    )
    if not hmac.compare_digest(resp.h, expected):
        return _reject("confirmation digest mismatch")
    return ClientAccept(session_key)


def _reject(reason: str) -> Reject:
    log.info("rejecting: %s", reason)
    return Reject(reason)


class AuthServer:
    """AuthServer verifies ring signatures and tracks seen request identities.

    Identities of accepted requests are kept in a bounded window; a request
    reusing one is rejected before its signature is checked.
    """

    keys: ServerKeys
    ring: RingDirectory
    cfg: CombiningConfig
    window: int
    _seed: bytes
    _counter: int
    _seen: OrderedDict[bytes, None]
    _lock: threading.Lock

    def __init__(  # noqa: PLR0913
        self: AuthServer,
        keys: ServerKeys,
        ring: RingDirectory,
        cfg: CombiningConfig | None = None,
        seed: bytes = b"",
        window: int = DEFAULT_REPLAY_WINDOW,
    ) -> None:
        """Create an AuthServer."""
        if window < 1:
            msg = "replay window must hold at least one identity"
            raise DomainError(msg)
        self.keys = keys
        self.ring = ring
        self.cfg = cfg if cfg is not None else CombiningConfig.for_ring(ring)
        self.window = window
        self._seed = seed
        self._counter = 0
        self._seen = OrderedDict()
        self._lock = threading.Lock()

    @property
    def public(self: AuthServer) -> ServerPublic:
        """The server's published values."""
        return self.keys.public

    def has_seen(self: AuthServer, identity: bytes) -> bool:
        """Return True if identity is inside the replay window."""
        with self._lock:
            return identity in self._seen

    def handle(
        self: AuthServer, sig: RingSignature, identity: bytes
    ) -> ServerAccept | Reject:
        """Verify one request and record its identity on acceptance."""
        with self._lock:
            if identity in self._seen:
                log.warning("replayed request identity %s", identity.hex())
                return Reject("replayed request identity")
            request_seed = derive_seed(self._seed, self._counter)
            self._counter += 1

        verdict = server_verify_and_respond(
            self.keys, self.ring, sig, identity, self.cfg, request_seed
        )
        if isinstance(verdict, Reject):
            return verdict

        with self._lock:
            if identity in self._seen:
                log.warning("replayed request identity %s", identity.hex())
                return Reject("replayed request identity")
            self._seen[identity] = None
            while len(self._seen) > self.window:
                self._seen.popitem(last=False)
        return verdict
