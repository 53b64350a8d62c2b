"""meshanon - Anonymous authentication and key rotation for wireless mesh networks."""

from __future__ import annotations

__version__ = "0.1.0"

from meshanon.groupmath import (
    gen_group_params,
    is_in_subgroup,
    is_valid_group,
    mod_exp,
    mod_inv,
)
from meshanon.keymgmt import (
    KeyListServer,
    NodeKeyRing,
    correction_factor,
    current_key_index,
    generate_key_list,
    lookup_key,
    remaining_validity,
    request_trigger_index,
)
from meshanon.ringauth import (
    AuthServer,
    client_confirm,
    gen_server_keys,
    make_directory,
    server_verify_and_respond,
    sign_and_initiate,
)
from meshanon.serialize import (
    SerializationError,
    decode_key_list,
    decode_key_request,
    decode_response,
    decode_signature,
    encode_key_list,
    encode_key_request,
    encode_response,
    encode_signature,
)
from meshanon.trapdoor import f_eval, f_invert, keygen
from meshanon.types import (
    ClientAccept,
    ClientSession,
    ClockSkewError,
    CombiningConfig,
    CombiningWidthError,
    DomainError,
    EncodingError,
    GroupGenerationError,
    GroupMathError,
    GroupParams,
    KeyHandle,
    KeyList,
    KeyManagementError,
    MalformedSignatureError,
    Preimage,
    Reject,
    RingAuthError,
    RingDirectory,
    RingMember,
    RingSignature,
    ServerAccept,
    ServerKeys,
    ServerPublic,
    ServerResponse,
    SessionExpiredError,
    SigningError,
    TrapdoorError,
    TrapdoorKeyPair,
    TrapdoorPrivate,
    TrapdoorPublic,
)

__all__ = [
    "AuthServer",
    "ClientAccept",
    "ClientSession",
    "ClockSkewError",
    "CombiningConfig",
    "CombiningWidthError",
    "DomainError",
    "EncodingError",
    "GroupGenerationError",
    "GroupMathError",
    "GroupParams",
    "KeyHandle",
    "KeyList",
    "KeyListServer",
    "KeyManagementError",
    "MalformedSignatureError",
    "NodeKeyRing",
    "Preimage",
    "Reject",
    "RingAuthError",
    "RingDirectory",
    "RingMember",
    "RingSignature",
    "SerializationError",
    "ServerAccept",
    "ServerKeys",
    "ServerPublic",
    "ServerResponse",
    "SessionExpiredError",
    "SigningError",
    "TrapdoorError",
    "TrapdoorKeyPair",
    "TrapdoorPrivate",
    "TrapdoorPublic",
    "client_confirm",
    "correction_factor",
    "current_key_index",
    "decode_key_list",
    "decode_key_request",
    "decode_response",
    "decode_signature",
    "encode_key_list",
    "encode_key_request",
    "encode_response",
    "encode_signature",
    "f_eval",
    "f_invert",
    "gen_group_params",
    "gen_server_keys",
    "generate_key_list",
    "is_in_subgroup",
    "is_valid_group",
    "keygen",
    "lookup_key",
    "make_directory",
    "mod_exp",
    "mod_inv",
    "remaining_validity",
    "request_trigger_index",
    "server_verify_and_respond",
    "sign_and_initiate",
]
