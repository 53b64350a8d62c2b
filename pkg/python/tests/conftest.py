from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING

import pytest

from meshanon.groupmath import gen_group_params
from meshanon.ringauth import gen_server_keys, make_directory
from meshanon.trapdoor import keygen
from meshanon.types import CombiningConfig, GroupParams
from meshanon.util import derive_seed

if TYPE_CHECKING:
    from collections.abc import Callable

    from meshanon.types import RingDirectory, ServerKeys, TrapdoorKeyPair


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption(
        "--runslow",
        action="store_true",
        default=False,
        help="run acceptance-scale tests",
    )


def pytest_runtest_setup(item: pytest.Item) -> None:
    # Acceptance-scale runs only happen on request
    if any(item.iter_markers(name="slow")) and not item.config.getoption("--runslow"):
        pytest.skip("acceptance-scale test, use --runslow")


@dataclass(frozen=True)
class RingSetup:
    ring: RingDirectory
    pairs: tuple[TrapdoorKeyPair, ...]
    server: ServerKeys
    cfg: CombiningConfig


@lru_cache(maxsize=None)
def _ring_setup(n: int, p_bits: int, q_bits: int, label: str) -> RingSetup:
    seed = derive_seed(b"test-ring", label)
    pairs = tuple(
        keygen(
            gen_group_params(p_bits, q_bits, derive_seed(seed, b"group", i)),
            derive_seed(seed, b"key", i),
        )
        for i in range(n)
    )
    ring = make_directory(
        (f"member-{i:02d}".encode(), pair.public) for i, pair in enumerate(pairs)
    )
    server = gen_server_keys(
        gen_group_params(p_bits, q_bits, derive_seed(seed, b"server-group")),
        derive_seed(seed, b"server-key"),
    )
    return RingSetup(ring, pairs, server, CombiningConfig.for_ring(ring))


@pytest.fixture(scope="session")
def toy_group() -> GroupParams:
    return GroupParams(23, 11, 4)


@pytest.fixture(scope="session")
def tiny_group() -> GroupParams:
    return gen_group_params(16, 8, b"tiny-group")


@pytest.fixture(scope="session")
def ring_setup() -> Callable[..., RingSetup]:
    """Build (and cache) a ring of n members with 64-bit groups."""

    def build(
        n: int, p_bits: int = 64, q_bits: int = 32, label: str = "default"
    ) -> RingSetup:
        return _ring_setup(n, p_bits, q_bits, label)

    return build
