"""meshanon.types - Type definitions for meshanon."""

from __future__ import annotations

from meshanon.types.group import (
    DomainError,
    EncodingError,
    GroupGenerationError,
    GroupMathError,
    GroupParams,
)
from meshanon.types.keylist import (
    ClockSkewError,
    KeyHandle,
    KeyList,
    KeyManagementError,
    SchedulerState,
    SessionExpiredError,
)
from meshanon.types.permutation import (
    CombiningConfig,
    CombiningWidthError,
    FeistelPermutation,
    KeyedPermutation,
    XorPermutation,
)
from meshanon.types.ring import (
    ClientAccept,
    ClientSession,
    MalformedSignatureError,
    Reject,
    RingAuthError,
    RingDirectory,
    RingMember,
    RingSignature,
    ServerAccept,
    ServerKeys,
    ServerPublic,
    ServerResponse,
    SigningError,
)
from meshanon.types.scenario import (
    DelaySpec,
    DropCause,
    FlowSpec,
    JoinPhase,
    KeyConfig,
    KeyMode,
    LinkSpec,
    Metrics,
    NodeKind,
    NodeSpec,
    RingConfig,
    ScenarioError,
    ScenarioMismatchError,
    SimScenario,
    SimulationError,
    SimulationInvariantError,
    TrafficKind,
)
from meshanon.types.trapdoor import (
    Preimage,
    TrapdoorError,
    TrapdoorKeyPair,
    TrapdoorPrivate,
    TrapdoorPublic,
)

__all__ = [
    "ClientAccept",
    "ClientSession",
    "ClockSkewError",
    "CombiningConfig",
    "CombiningWidthError",
    "DelaySpec",
    "DomainError",
    "DropCause",
    "EncodingError",
    "FeistelPermutation",
    "FlowSpec",
    "GroupGenerationError",
    "GroupMathError",
    "GroupParams",
    "JoinPhase",
    "KeyConfig",
    "KeyHandle",
    "KeyList",
    "KeyManagementError",
    "KeyMode",
    "KeyedPermutation",
    "LinkSpec",
    "MalformedSignatureError",
    "Metrics",
    "NodeKind",
    "NodeSpec",
    "Preimage",
    "Reject",
    "RingAuthError",
    "RingConfig",
    "RingDirectory",
    "RingMember",
    "RingSignature",
    "ScenarioError",
    "ScenarioMismatchError",
    "SchedulerState",
    "ServerAccept",
    "ServerKeys",
    "ServerPublic",
    "ServerResponse",
    "SessionExpiredError",
    "SigningError",
    "SimScenario",
    "SimulationError",
    "SimulationInvariantError",
    "TrafficKind",
    "TrapdoorError",
    "TrapdoorKeyPair",
    "TrapdoorPrivate",
    "TrapdoorPublic",
    "XorPermutation",
]
