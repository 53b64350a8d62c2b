"""meshanon.trapdoor - The per-user discrete-log trapdoor function and its inverse."""

from __future__ import annotations

from typing import TYPE_CHECKING

from meshanon.groupmath import is_in_subgroup, is_valid_group, mod_exp
from meshanon.types.group import DomainError
from meshanon.types.trapdoor import (
    Preimage,
    TrapdoorError,
    TrapdoorKeyPair,
    TrapdoorPrivate,
    TrapdoorPublic,
)
from meshanon.util import DeterministicStream

if TYPE_CHECKING:
    from meshanon.types.group import GroupParams


def public_from_private(group: GroupParams, priv: TrapdoorPrivate) -> TrapdoorPublic:
    """Compute y_A = g^x_A mod p for an existing private key."""
    if not 1 <= priv.x_a < group.q:
        msg = "x_A must lie in [1, q)"
        raise TrapdoorError(msg)
    return TrapdoorPublic(group, mod_exp(group.g, priv.x_a, group.p))


def keygen(group: GroupParams, seed: bytes) -> TrapdoorKeyPair:
    """Draw x_A uniformly from [1, q) and derive the public key."""
    if not is_valid_group(group):
        msg = f"invalid group {group}"
        raise DomainError(msg)
    stream = DeterministicStream(seed, b"trapdoor-keygen")
    priv = TrapdoorPrivate(stream.randrange(1, group.q))
    return TrapdoorKeyPair(public_from_private(group, priv), priv)


def check_pairing(pub: TrapdoorPublic, priv: TrapdoorPrivate) -> bool:
    """Return True iff the private exponent matches the public key."""
    group = pub.group
    return (
        1 <= priv.x_a < group.q
        and is_in_subgroup(group, pub.y_a)
        and mod_exp(group.g, priv.x_a, group.p) == pub.y_a
    )


def f_eval(pub: TrapdoorPublic, pre: Preimage) -> int:
    """Evaluate f(alpha, beta) = alpha * y_A^(alpha mod q) * g^beta mod p."""
    p, q, g = pub.group.p, pub.group.q, pub.group.g
    if not 1 <= pre.alpha < p or not 0 <= pre.beta < q:
        msg = "preimage out of range"
        raise TrapdoorError(msg)
    return pre.alpha * mod_exp(pub.y_a, pre.alpha % q, p) * mod_exp(g, pre.beta, p) % p


def f_invert(
    pub: TrapdoorPublic, priv: TrapdoorPrivate, y: int, k: int
) -> Preimage:
    """Find a preimage of y using the private key and the blinding value k.

    alpha = y * g^-(k * (g^k mod p) mod q), beta = k * (g^k mod p) - x_A * alpha
    with both exponents taken mod q.
    """
    p, q, g = pub.group.p, pub.group.q, pub.group.g
    if not 1 <= y < p:
        msg = f"inversion target {y} outside [1, p)"
        raise TrapdoorError(msg)
    if not 0 <= k < q:
        msg = "blinding value must lie in [0, q)"
        raise TrapdoorError(msg)
    exponent = k * mod_exp(g, k, p) % q
    alpha = y * mod_exp(g, (-exponent) % q, p) % p
    beta = (exponent - priv.x_a * (alpha % q)) % q
    return Preimage(alpha, beta)
