"""``srv6pulse`` command line: simulate, codec, tunnel.

Exit codes: 0 success, 1 codec error in the input, 2 bad configuration or
arguments, 3 I/O or socket failure.
"""

from __future__ import annotations

import argparse
import sys
from ipaddress import IPv6Address
from pathlib import Path

from ..netsim.campaign import run_sweep
from ..netsim.config import ConfigError
from ..wire import WireError
from .codec import FieldFileError, decode_to_fields, describe_error, encode_from_fields
from .manifest import load_manifest, rows_to_csv
from .tunnel import TunnelParams, parse_endpoint, run_tunnel

EXIT_OK, EXIT_CODEC, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


def cmd_simulate(args) -> int:
    try:
        manifest = load_manifest(args.manifest)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"cannot read manifest: {e}", file=sys.stderr)
        return EXIT_IO
    rows = run_sweep(manifest.config, manifest.points(), manifest.stress, jobs=args.jobs)
    text = rows_to_csv(rows)
    try:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / args.csv_name).write_text(text)
    except OSError as e:
        print(f"cannot write results: {e}", file=sys.stderr)
        return EXIT_IO
    if not args.quiet:
        sys.stdout.write(text)
    return EXIT_OK


def _read_input(arg: str | None, path: str | None) -> str:
    if path is not None:
        return Path(path).read_text()
    if arg is None or arg == "-":
        return sys.stdin.read()
    return arg


def cmd_codec(args) -> int:
    try:
        text = _read_input(args.input, args.file)
    except OSError as e:
        print(f"cannot read input: {e}", file=sys.stderr)
        return EXIT_IO
    if args.mode == "decode":
        try:
            data = bytes.fromhex("".join(text.split()))
        except ValueError:
            print("malformed hex input", file=sys.stderr)
            return EXIT_CONFIG
        try:
            lines = decode_to_fields(data, args.layer)
        except WireError as e:
            print(describe_error(e), file=sys.stderr)
            return EXIT_CODEC
        print("\n".join(lines))
        return EXIT_OK
    try:
        data = encode_from_fields(text)
    except FieldFileError as e:
        print(f"bad field file: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except WireError as e:
        print(describe_error(e), file=sys.stderr)
        return EXIT_CODEC
    print(data.hex())
    return EXIT_OK


def cmd_tunnel(args) -> int:
    try:
        params = TunnelParams(
            role=args.role,
            listen=parse_endpoint(args.listen),
            peer=parse_endpoint(args.peer),
            interval_ns=round(args.interval_ms * 1_000_000),
            multiplier=args.multiplier,
            session_id=args.session_id,
            self_addr=IPv6Address(args.self_addr),
            slave_addr=IPv6Address(args.slave_addr),
            duration_s=args.duration_s,
        )
        params.check()
    except ValueError as e:
        print(f"bad tunnel parameters: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        run_tunnel(params)
    except OSError as e:
        print(f"socket error: {e}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="srv6pulse", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="run a campaign sweep from a manifest")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--csv-name", default="campaign.csv")
    sp.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    sp.add_argument("-q", "--quiet", action="store_true")
    sp.set_defaults(func=cmd_simulate)

    cp = sub.add_parser("codec", help="decode hex to fields or encode fields to hex")
    cp.add_argument("mode", choices=("encode", "decode"))
    cp.add_argument("input", nargs="?", help="hex string (decode) or field text; '-' for stdin")
    cp.add_argument("--file", help="read input from a file")
    cp.add_argument("--layer", choices=("auto", "packet", "srh"), default="auto")
    cp.set_defaults(func=cmd_codec)

    tp = sub.add_parser("tunnel", help="run a live master or slave over UDP")
    tp.add_argument("--role", choices=("master", "slave"), required=True)
    tp.add_argument("--listen", required=True, help="local addr:port")
    tp.add_argument("--peer", required=True, help="peer addr:port")
    tp.add_argument("--interval-ms", type=float, default=10.0)
    tp.add_argument("--multiplier", type=int, default=3)
    tp.add_argument("--session-id", type=int, default=1)
    tp.add_argument("--self-addr", default="2001:db8::a")
    tp.add_argument("--slave-addr", default="2001:db8::b5")
    tp.add_argument("--duration-s", type=float, default=None, help="stop after this many seconds")
    tp.set_defaults(func=cmd_tunnel)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
