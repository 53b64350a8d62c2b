"""meshanon.cli - Command-line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TYPE_CHECKING, Any, NoReturn

from scipy import stats

from meshanon import __version__
from meshanon.groupmath import gen_group_params, is_valid_group
from meshanon.keymgmt import KeyListServer, lookup_key
from meshanon.ringauth import (
    client_confirm,
    gen_server_keys,
    make_directory,
    server_verify_and_respond,
    sign_and_initiate,
)
from meshanon.serialize import (
    SerializationError,
    decode_signature,
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
    server_keys_from_json,
    server_keys_to_json,
    server_public_from_json,
    session_to_json,
    write_json,
)
from meshanon.sim import (
    MeshSimulator,
    average_overhead,
    build_bootstrap_topology,
    build_evaluation_topology,
    write_trace,
)
from meshanon.trapdoor import check_pairing, keygen
from meshanon.types.group import GroupMathError
from meshanon.types.keylist import KeyManagementError
from meshanon.types.permutation import CombiningConfig
from meshanon.types.ring import (
    MalformedSignatureError,
    Reject,
    RingAuthError,
    RingSignature,
    ServerAccept,
    ServerResponse,
)
from meshanon.types.scenario import KeyMode, SimulationError
from meshanon.types.trapdoor import Preimage, TrapdoorKeyPair
from meshanon.util import derive_seed, normalize_seed

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from meshanon.types.ring import RingDirectory
    from meshanon.types.scenario import Metrics, SimScenario

log = logging.getLogger(__name__)

ENV_LOG_LEVEL = "MESHANON_LOG"
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REJECT = 2

DEFAULT_P_BITS = 1024
DEFAULT_Q_BITS = 160
TINY_P_BITS = 16
TINY_Q_BITS = 8
REFERENCE_SIZE_FIT = (60.0, 60.0)
TAMPER_FIELDS = ("none", "alpha", "beta", "v", "V", "R", "Y", "h")
# Namespace entries echoed elsewhere or not parameters at all
_UNECHOED = frozenset({"command", "handler", "log_level", "seed", "p_bits", "q_bits"})


class CliUsageError(Exception):
    """The command line is inconsistent."""


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with status 1."""

    def error(self: _Parser, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class CliConfig:
    """Settings shared by every subcommand, echoed in the JSON output."""

    subcommand: str
    seed: int
    p_bits: int = DEFAULT_P_BITS
    q_bits: int = DEFAULT_Q_BITS
    n: int = 5
    bits: int | None = None
    out: Path | None = None
    scenario: Path | None = None
    params: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_args(cls: type[CliConfig], args: argparse.Namespace) -> CliConfig:
        """Collect the shared settings from parsed arguments."""
        p_bits = getattr(args, "p_bits", DEFAULT_P_BITS)
        q_bits = getattr(args, "q_bits", DEFAULT_Q_BITS)
        if getattr(args, "tiny", False):
            p_bits, q_bits = TINY_P_BITS, TINY_Q_BITS
        sizes = getattr(args, "n", 5)
        return cls(
            subcommand=args.command,
            seed=args.seed,
            p_bits=p_bits,
            q_bits=q_bits,
            n=sizes if isinstance(sizes, int) else max(sizes),
            bits=getattr(args, "bits", None),
            out=getattr(args, "out", None),
            scenario=getattr(args, "scenario", None),
            params={
                name: str(value) if isinstance(value, Path) else value
                for name, value in sorted(vars(args).items())
                if name not in _UNECHOED
            },
        )

    @property
    def seed_bytes(self: CliConfig) -> bytes:
        """The seed as bytes."""
        return normalize_seed(self.seed)

    def echo(self: CliConfig) -> dict[str, Any]:
        """Parameters to echo into machine-readable output."""
        return {
            "command": self.subcommand,
            "seed": self.seed,
            "p_bits": self.p_bits,
            "q_bits": self.q_bits,
            "params": self.params,
        }


def _emit(config: CliConfig, doc: dict[str, Any]) -> None:
    doc = {**config.echo(), **doc}
    if config.out is not None and config.subcommand != "keygen":
        write_json(config.out, doc)
    sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _combining(ring: RingDirectory, bits: int | None) -> CombiningConfig:
    return CombiningConfig.for_ring(ring) if bits is None else CombiningConfig(bits)


def _load_ring(path: Path) -> RingDirectory:
    return make_directory(ring_members_from_json(read_json(path)))


def cmd_keygen(config: CliConfig, args: argparse.Namespace) -> int:
    """Write member key pairs, the ring directory and the server keys."""
    del args
    if config.out is None:
        msg = "keygen needs --out"
        raise CliUsageError(msg)
    config.out.mkdir(parents=True, exist_ok=True)
    seed = config.seed_bytes
    pairs = []
    for index in range(config.n):
        group = gen_group_params(
            config.p_bits, config.q_bits, derive_seed(seed, b"member-group", index)
        )
        pairs.append(keygen(group, derive_seed(seed, b"member-key", index)))
    server_group = gen_group_params(
        config.p_bits, config.q_bits, derive_seed(seed, b"server-group")
    )
    server = gen_server_keys(server_group, derive_seed(seed, b"server-key"))
    for pair in pairs:
        if not is_valid_group(pair.public.group) or not check_pairing(
            pair.public, pair.private
        ):
            msg = "generated member key failed validation"
            raise GroupMathError(msg)

    ring = make_directory(
        (f"member-{index}".encode(), pair.public) for index, pair in enumerate(pairs)
    )
    files = {"ring.json": ring_to_json(ring)}
    for index, pair in enumerate(pairs):
        files[f"member-{index}.json"] = keypair_to_json(pair)
    files["server.json"] = server_keys_to_json(server)
    files["server.pub.json"] = server_keys_to_json(server, private=False)
    for name, doc in files.items():
        write_json(config.out / name, doc)
    _emit(config, {"n": config.n, "files": sorted(files)})
    return EXIT_OK


def _identity(config: CliConfig, raw: str | None) -> bytes:
    if raw is not None:
        try:
            return bytes.fromhex(raw)
        except ValueError as e:
            msg = "--identity must be hex"
            raise CliUsageError(msg) from e
    return derive_seed(config.seed_bytes, b"identity")[:16]


def cmd_sign(config: CliConfig, args: argparse.Namespace) -> int:
    """Run Round 1 and write the signature with the client session."""
    ring = _load_ring(args.ring)
    pair = keypair_from_json(read_json(args.key))
    server = server_public_from_json(read_json(args.server))
    cfg = _combining(ring, config.bits)
    identity = _identity(config, args.identity)
    sig, session = sign_and_initiate(
        ring,
        args.index,
        pair.private,
        server,
        identity,
        cfg,
        derive_seed(config.seed_bytes, b"sign"),
    )
    _emit(
        config,
        {
            "bits": cfg.bits,
            "identity": identity.hex(),
            "sigma": encode_signature(sig, cfg.bits).hex(),
            "session": session_to_json(session),
        },
    )
    return EXIT_OK


def _verdict_doc(verdict: ServerAccept | Reject) -> dict[str, Any]:
    if isinstance(verdict, Reject):
        return {"verdict": "reject", "reason": verdict.reason}
    return {
        "verdict": "accept",
        "response": encode_response(verdict.response).hex(),
        "session_key": format(verdict.session_key, "x"),
    }


def cmd_verify(config: CliConfig, args: argparse.Namespace) -> int:
    """Run Round 2 over a signature file."""
    ring = _load_ring(args.ring)
    keys = server_keys_from_json(read_json(args.server))
    signed = read_json(args.signature)
    try:
        bits = int(signed["bits"])
        sig = decode_signature(bytes.fromhex(signed["sigma"]), bits)
        identity = bytes.fromhex(signed["identity"])
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, SerializationError):
            raise
        msg = f"{args.signature} is not a signature file"
        raise SerializationError(msg) from e
    verdict = server_verify_and_respond(
        keys,
        ring,
        sig,
        identity,
        CombiningConfig(bits),
        derive_seed(config.seed_bytes, b"respond"),
    )
    _emit(config, _verdict_doc(verdict))
    return EXIT_REJECT if isinstance(verdict, Reject) else EXIT_OK


def _flip(value: int) -> int:
    return value ^ 1


def _tamper_signature(sig: RingSignature, field: str) -> RingSignature:
    if field == "alpha":
        first = sig.pairs[0]
        pairs = (Preimage(_flip(first.alpha) or 2, first.beta), *sig.pairs[1:])
        return replace(sig, pairs=pairs)
    if field == "beta":
        first = sig.pairs[0]
        return replace(
            sig, pairs=(Preimage(first.alpha, _flip(first.beta)), *sig.pairs[1:])
        )
    if field == "v":
        return replace(sig, v=_flip(sig.v))
    if field == "V":
        return replace(sig, big_v=_flip(sig.big_v))
    if field == "R":
        return replace(sig, big_r=_flip(sig.big_r))
    return sig


def _tamper_response(resp: ServerResponse, field: str) -> ServerResponse:
    if field == "Y":
        return replace(resp, big_y=_flip(resp.big_y))
    if field == "h":
        return replace(resp, h=bytes([resp.h[0] ^ 1]) + resp.h[1:])
    return resp


def cmd_exchange(config: CliConfig, args: argparse.Namespace) -> int:
    """Run all three rounds locally and write the transcript."""
    keys_dir: Path = args.keys
    ring = _load_ring(keys_dir / "ring.json")
    pair: TrapdoorKeyPair = keypair_from_json(
        read_json(keys_dir / f"member-{args.index}.json")
    )
    server = server_keys_from_json(read_json(keys_dir / "server.json"))
    cfg = _combining(ring, config.bits)
    identity = _identity(config, args.identity)
    sig, session = sign_and_initiate(
        ring,
        args.index,
        pair.private,
        server.public,
        identity,
        cfg,
        derive_seed(config.seed_bytes, b"sign"),
    )
    sig = _tamper_signature(sig, args.tamper)
    transcript: dict[str, Any] = {
        "bits": cfg.bits,
        "identity": identity.hex(),
        "tamper": args.tamper,
    }
    try:
        transcript["sigma"] = encode_signature(sig, cfg.bits).hex()
        verdict = server_verify_and_respond(
            server,
            ring,
            sig,
            identity,
            cfg,
            derive_seed(config.seed_bytes, b"respond"),
        )
    except (MalformedSignatureError, SerializationError) as e:
        verdict = Reject(f"malformed signature: {e}")
    transcript["server"] = _verdict_doc(verdict)
    if isinstance(verdict, ServerAccept):
        confirmed = client_confirm(
            session, _tamper_response(verdict.response, args.tamper)
        )
        if isinstance(confirmed, Reject):
            transcript["client"] = {"verdict": "reject", "reason": confirmed.reason}
            verdict = confirmed
        else:
            transcript["client"] = {
                "verdict": "accept",
                "session_key": format(confirmed.session_key, "x"),
            }
            transcript["keys_equal"] = confirmed.session_key == verdict.session_key
    _emit(config, transcript)
    return EXIT_REJECT if isinstance(verdict, Reject) else EXIT_OK


def cmd_keylist(config: CliConfig, args: argparse.Namespace) -> int:
    """Generate the key list of one session and optionally resolve a key."""
    server = KeyListServer(
        derive_seed(config.seed_bytes, b"key-lists"), args.cardinality, args.timeout
    )
    key_list = server.list_for_session(args.session)
    doc: dict[str, Any] = {
        "session": key_list.session,
        "ts_kl": key_list.ts_kl,
        "timeout": key_list.timeout,
        "cardinality": key_list.cardinality,
        "keys": [key.hex() for key in key_list.keys],
    }
    if args.at is not None:
        key, handle = lookup_key(key_list, args.at)
        doc["at"] = {
            "t_now": args.at,
            "key_idx": handle.key_idx,
            "remaining": handle.remaining,
            "key": key.hex(),
        }
    _emit(config, doc)
    return EXIT_OK


def _scenario(config: CliConfig, args: argparse.Namespace) -> SimScenario:
    if config.scenario is not None:
        scenario = load_scenario(config.scenario)
    elif args.bootstrap:
        scenario = build_bootstrap_topology()
    else:
        scenario = build_evaluation_topology()
    key = scenario.key
    if args.no_correction:
        key = replace(key, correction_enabled=False)
    mode = KeyMode(args.mode) if args.mode is not None else scenario.mode
    return replace(scenario, key=key, mode=mode, seed=config.seed)


def cmd_simulate(config: CliConfig, args: argparse.Namespace) -> int:
    """Run a scenario for one or more seeds."""
    base = _scenario(config, args)
    runs: list[Metrics] = []
    baselines: list[Metrics] = []
    for offset in range(args.runs):
        scenario = replace(base, seed=base.seed + offset)
        sim = MeshSimulator(scenario, trace=args.trace is not None)
        runs.append(sim.run())
        if args.trace is not None and offset == 0:
            write_trace(sim.records or [], args.trace)
        if args.compare:
            static = scenario.with_mode(KeyMode.STATIC)
            baselines.append(MeshSimulator(static).run())
    doc: dict[str, Any] = {
        "mode": base.mode.value,
        "correction_enabled": base.key.correction_enabled,
        "runs": [metrics_to_json(m) for m in runs],
    }
    if args.compare:
        doc["overhead"] = average_overhead(baselines, runs).to_json()
    _emit(config, doc)
    return EXIT_OK


def cmd_bench_sig_size(config: CliConfig, args: argparse.Namespace) -> int:
    """Measure sigma length against ring size and fit size = A * n + B.

    Members share one group so every member encodes at the same width.
    """
    sizes = sorted(set(args.n))
    if not sizes or sizes[0] < 1:
        msg = "--n values must be >= 1"
        raise CliUsageError(msg)
    seed = config.seed_bytes
    group = gen_group_params(config.p_bits, config.q_bits, derive_seed(seed, b"group"))
    server = gen_server_keys(
        gen_group_params(config.p_bits, config.q_bits, derive_seed(seed, b"server")),
        derive_seed(seed, b"server-key"),
    )
    pairs = [
        keygen(group, derive_seed(seed, b"member", index)) for index in range(sizes[-1])
    ]
    rows = []
    for n in sizes:
        ring = make_directory(
            (f"member-{index:04d}".encode(), pairs[index].public) for index in range(n)
        )
        cfg = _combining(ring, config.bits)
        sig, _ = sign_and_initiate(
            ring,
            0,
            pairs[0].private,
            server.public,
            b"bench",
            cfg,
            derive_seed(seed, b"sign", n),
        )
        rows.append(
            {
                "n": n,
                "bytes": len(encode_signature(sig, cfg.bits)),
                "fixed_bytes": len(
                    encode_signature_fixed(sig, cfg.bits, server.group, ring)
                ),
            }
        )
    doc: dict[str, Any] = {"rows": rows}
    if len(rows) > 1:
        fit = stats.linregress([r["n"] for r in rows], [r["fixed_bytes"] for r in rows])
        slope, intercept = float(fit.slope), float(fit.intercept)
        doc["fit"] = {
            "A": slope,
            "B": intercept,
            "max_residual": max(
                abs(r["fixed_bytes"] - (slope * r["n"] + intercept)) for r in rows
            ),
        }
    doc["reference"] = {"A": REFERENCE_SIZE_FIT[0], "B": REFERENCE_SIZE_FIT[1]}
    _emit(config, doc)
    return EXIT_OK


def _add_group_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--p-bits", type=int, default=DEFAULT_P_BITS)
    parser.add_argument("--q-bits", type=int, default=DEFAULT_Q_BITS)
    parser.add_argument(
        "--tiny", action="store_true", help="test-size groups with p < 2^16"
    )


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser."""
    parser = _Parser(prog="meshanon", description=__doc__, allow_abbrev=False)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "--log-level",
        default=None,
        help=f"logging level (default: ${ENV_LOG_LEVEL} or WARNING)",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(
        name: str, handler: Callable[[CliConfig, argparse.Namespace], int]
    ) -> argparse.ArgumentParser:
        child = sub.add_parser(name, help=handler.__doc__, allow_abbrev=False)
        child.add_argument("--seed", type=int, default=0)
        child.set_defaults(handler=handler)
        return child

    keygen_p = command("keygen", cmd_keygen)
    _add_group_flags(keygen_p)
    keygen_p.add_argument("--n", type=int, default=5)
    keygen_p.add_argument("--out", type=Path, required=True)

    sign_p = command("sign", cmd_sign)
    sign_p.add_argument("--ring", type=Path, required=True)
    sign_p.add_argument("--key", type=Path, required=True)
    sign_p.add_argument("--server", type=Path, required=True)
    sign_p.add_argument("--index", type=int, required=True)
    sign_p.add_argument("--identity")
    sign_p.add_argument("--bits", type=int)
    sign_p.add_argument("--out", type=Path)

    verify_p = command("verify", cmd_verify)
    verify_p.add_argument("--ring", type=Path, required=True)
    verify_p.add_argument("--server", type=Path, required=True)
    verify_p.add_argument("--signature", type=Path, required=True)
    verify_p.add_argument("--out", type=Path)

    exchange_p = command("exchange", cmd_exchange)
    exchange_p.add_argument("--keys", type=Path, required=True)
    exchange_p.add_argument("--index", type=int, default=0)
    exchange_p.add_argument("--identity")
    exchange_p.add_argument("--bits", type=int)
    exchange_p.add_argument("--tamper", choices=TAMPER_FIELDS, default="none")
    exchange_p.add_argument("--out", type=Path)

    keylist_p = command("keylist", cmd_keylist)
    keylist_p.add_argument("--cardinality", type=int, default=10)
    keylist_p.add_argument("--timeout", type=float, default=1000.0)
    keylist_p.add_argument("--session", type=int, default=0)
    keylist_p.add_argument("--at", type=float)
    keylist_p.add_argument("--out", type=Path)

    simulate_p = command("simulate", cmd_simulate)
    source = simulate_p.add_mutually_exclusive_group()
    source.add_argument("--scenario", type=Path)
    source.add_argument("--evaluation", action="store_true")
    source.add_argument("--bootstrap", action="store_true")
    simulate_p.add_argument("--mode", choices=[m.value for m in KeyMode])
    simulate_p.add_argument("--runs", type=int, default=1)
    simulate_p.add_argument("--trace", type=Path)
    simulate_p.add_argument("--no-correction", action="store_true")
    simulate_p.add_argument("--compare", action="store_true")
    simulate_p.add_argument("--out", type=Path)

    bench_p = command("bench-sig-size", cmd_bench_sig_size)
    _add_group_flags(bench_p)
    bench_p.add_argument("--n", type=int, nargs="+", default=list(range(1, 21)))
    bench_p.add_argument("--bits", type=int)
    return parser


def configure_logging(level: str | None) -> None:
    """Send log records to stderr at the requested level."""
    name = (level or os.environ.get(ENV_LOG_LEVEL) or "WARNING").upper()
    numeric = logging.getLevelName(name)
    if not isinstance(numeric, int):
        msg = f"unknown log level {name}"
        raise CliUsageError(msg)
    logging.basicConfig(
        level=numeric,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def main(argv: Sequence[str] | None = None) -> int:
    """Run the command line and return the exit status."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        configure_logging(args.log_level)
        return int(args.handler(CliConfig.from_args(args), args))
    except CliUsageError as e:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"meshanon: error: {e}\n")
        return EXIT_ERROR
    except MalformedSignatureError as e:
        sys.stderr.write(f"meshanon: reject: {e}\n")
        return EXIT_REJECT
    except (
        GroupMathError,
        RingAuthError,
        KeyManagementError,
        SerializationError,
        SimulationError,
        OSError,
    ) as e:
        log.debug("command failed", exc_info=True)
        sys.stderr.write(f"meshanon: error: {e}\n")
        return EXIT_ERROR
