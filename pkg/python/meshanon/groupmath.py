"""meshanon.groupmath - Modular arithmetic and Schnorr group generation."""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING

import gmpy2

from meshanon.types.group import (
    DomainError,
    EncodingError,
    GroupGenerationError,
    GroupParams,
)
from meshanon.util import DeterministicStream

if TYPE_CHECKING:
    from collections.abc import Iterator

log = logging.getLogger(__name__)

PRIMALITY_ROUNDS = 64
MIN_Q_BITS = 8
_LENGTH_PREFIX = 4


def _small_primes(count: int) -> tuple[int, ...]:
    primes = [2]
    while len(primes) < count:
        primes.append(int(gmpy2.next_prime(primes[-1])))
    return tuple(primes)


SMALL_PRIMES = _small_primes(256)


def is_probable_prime(n: int) -> bool:
    """Trial division by small primes, then 64 Miller-Rabin rounds."""
    if n < 2:  # noqa: PLR2004
        return False
    for prime in SMALL_PRIMES:
        if n == prime:
            return True
        if n % prime == 0:
            return False
    return bool(gmpy2.is_prime(n, PRIMALITY_ROUNDS))


def mod_exp(base: int, exp: int, m: int) -> int:
    """Return base^exp mod m."""
    if m <= 1:
        msg = f"modulus must be > 1, got {m}"
        raise DomainError(msg)
    if exp < 0:
        msg = "exponent must be non-negative"
        raise DomainError(msg)
    return int(gmpy2.powmod(base, exp, m))


def mod_inv(a: int, m: int) -> int:
    """Return the inverse of a modulo m."""
    if m <= 1:
        msg = f"modulus must be > 1, got {m}"
        raise DomainError(msg)
    try:
        return int(gmpy2.invert(a, m))
    except ZeroDivisionError:
        msg = f"{a} is not invertible modulo {m}"
        raise DomainError(msg) from None


def is_valid_group(params: GroupParams) -> bool:
    """Return True iff p, q are prime, q | p - 1 and g has order exactly q."""
    p, q, g = params.p, params.q, params.g
    if not all(isinstance(x, int) for x in (p, q, g)):
        return False
    if q < 2 or p <= q or not 1 < g < p:  # noqa: PLR2004
        return False
    if (p - 1) % q != 0:
        return False
    if not is_probable_prime(p) or not is_probable_prime(q):
        return False
    return mod_exp(g, q, p) == 1


def is_in_subgroup(params: GroupParams, element: int) -> bool:
    """Return True iff element lies in the order-q subgroup."""
    return 1 <= element < params.p and mod_exp(element, params.q, params.p) == 1


def _candidate_multipliers(k_min: int, k_max: int, budget: int) -> list[int] | None:
    """Enumerate small even multiplier ranges outright; None means sample."""
    first = k_min + (k_min % 2)
    if first > k_max:
        return []
    if (k_max - first) // 2 + 1 <= budget:
        return list(range(first, k_max + 1, 2))
    return None


def gen_group_params(
    p_bits: int,
    q_bits: int,
    seed: bytes,
    *,
    allow_tiny: bool = False,
    max_attempts: int = 4096,
) -> GroupParams:
    """Generate a Schnorr group deterministically from seed.

    A random prime q of q_bits is drawn first, then random even k until
    p = kq + 1 is a p_bits prime; g = h^((p-1)/q) for random h with g != 1.
    Groups with q_bits below 8 are only produced when allow_tiny is set.
    """
    if q_bits >= p_bits:
        msg = "q_bits must be smaller than p_bits"
        raise DomainError(msg)
    if q_bits < (2 if allow_tiny else MIN_Q_BITS):
        msg = f"q_bits={q_bits} too small"
        raise DomainError(msg)

    stream = DeterministicStream(seed, b"group-params")
    k_budget = 32 * p_bits
    # p = kq + 1 must have exactly p_bits bits
    low = 1 << (p_bits - 1)
    high = (1 << p_bits) - 1
    for attempt in range(max_attempts):
        q = stream.randbits(q_bits) | (1 << (q_bits - 1)) | 1
        if not is_probable_prime(q):
            continue
        k_min = -(-(low - 1) // q)
        k_max = (high - 1) // q
        candidates = _candidate_multipliers(k_min, k_max, k_budget)
        draws: Iterator[int]
        if candidates is None:
            draws = (
                2 * stream.randrange(-(-k_min // 2), k_max // 2 + 1)
                for _ in range(k_budget)
            )
        else:
            draws = iter(candidates)
        for k in draws:
            p = k * q + 1
            if low <= p <= high and is_probable_prime(p):
                g = _find_generator(stream, p, q)
                if g is not None:
                    log.debug(
                        "group found after %d q draws: %d-bit p, %d-bit q",
                        attempt + 1,
                        p_bits,
                        q_bits,
                    )
                    return GroupParams(p, q, g)
    msg = f"no ({p_bits}, {q_bits})-bit group found in {max_attempts} attempts"
    raise GroupGenerationError(msg)


def _find_generator(stream: DeterministicStream, p: int, q: int) -> int | None:
    cofactor = (p - 1) // q
    for _ in range(64):
        h = stream.randrange(2, p - 1) if p > 3 else 2  # noqa: PLR2004
        g = mod_exp(h, cofactor, p)
        if g != 1:
            return g
    return None


def encode_int(value: int) -> bytes:
    """Canonical encoding: 4-byte length, then minimal big-endian bytes."""
    if value < 0:
        msg = "only non-negative integers are encodable"
        raise EncodingError(msg)
    body = value.to_bytes(max(1, (value.bit_length() + 7) // 8), "big")
    return len(body).to_bytes(_LENGTH_PREFIX, "big") + body


def encode_int_fixed(value: int, width: int) -> bytes:
    """Encode value padded to width bytes, for size measurement."""
    if value < 0 or value.bit_length() > 8 * width:
        msg = f"{value} does not fit in {width} bytes"
        raise EncodingError(msg)
    return width.to_bytes(_LENGTH_PREFIX, "big") + value.to_bytes(width, "big")


def decode_int(data: bytes, offset: int = 0, *, strict: bool = True) -> tuple[int, int]:
    """Decode one integer at offset; return it and the offset past it.

    With strict set, non-canonical leading zero bytes are rejected.
    """
    end = offset + _LENGTH_PREFIX
    if end > len(data):
        msg = "truncated integer length"
        raise EncodingError(msg)
    length = int.from_bytes(data[offset:end], "big")
    if length == 0 or end + length > len(data):
        msg = "truncated or empty integer body"
        raise EncodingError(msg)
    body = data[end : end + length]
    if strict and length > 1 and body[0] == 0:
        msg = "non-canonical integer encoding"
        raise EncodingError(msg)
    return int.from_bytes(body, "big"), end + length
