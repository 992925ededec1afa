"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 PE parse/validation error,
3 not enough slack, 4 extraction or authentication failure.
"""

from __future__ import annotations

import argparse
import getpass
import json
import os
import random
import sys
import tempfile
from pathlib import Path
from typing import Mapping, Optional, Sequence, TextIO

from . import pe, stego
from .carrier import CarrierPolicy
from .crypto import DEFAULT_ITERATIONS, KEY_BITS
from .errors import (
    EmptyPassword,
    InsufficientCapacity,
    PeFormatError,
    RetractError,
)

PASSWORD_ENV = "PESF_PASSWORD"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_CAPACITY = 3
EXIT_EXTRACT = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pesf", description="Hide encrypted data in the slack space of 32-bit PE files.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def carrier_opts(p):
        p.add_argument("--key-bits", type=int, choices=KEY_BITS, default=128)
        p.add_argument("--prefer-section", default=".rsrc",
                       help="section whose padding is filled first (default: .rsrc)")

    def password_opt(p):
        p.add_argument("--password",
                       help=f"password (unsafe: visible in shell history; prefer ${PASSWORD_ENV})")

    p = sub.add_parser("hide", help="embed a secret file into a cover PE")
    p.add_argument("--cover", required=True, type=Path)
    p.add_argument("--secret", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--iterations", type=int, default=DEFAULT_ITERATIONS)
    carrier_opts(p)
    password_opt(p)
    # test hook: deterministic salt and nonce
    p.add_argument("--insecure-seed", type=int, default=None, help=argparse.SUPPRESS)

    p = sub.add_parser("extract", help="recover a secret from a stego PE")
    p.add_argument("--stego", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--original", type=Path, help="original cover; switches to diff-based extraction")
    carrier_opts(p)
    password_opt(p)

    p = sub.add_parser("inspect", help="report slack capacity and validation findings")
    p.add_argument("file", type=Path)
    p.add_argument("--json", action="store_true", help="machine-readable output")
    carrier_opts(p)

    p = sub.add_parser("verify", help="check PE structure only")
    p.add_argument("file", type=Path)
    return parser


def _password(args, env: Mapping[str, str]) -> str:
    if args.password is not None:
        return args.password
    if env.get(PASSWORD_ENV):
        return env[PASSWORD_ENV]
    if sys.stdin is not None and sys.stdin.isatty():
        return getpass.getpass("Password: ")
    raise UsageError(f"no password: set ${PASSWORD_ENV} or pass --password")


def _options(args) -> stego.StegoOptions:
    policy = CarrierPolicy(prefer_section=args.prefer_section or None)
    iterations = getattr(args, "iterations", DEFAULT_ITERATIONS)
    try:
        return stego.StegoOptions(policy, args.key_bits, iterations)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _read(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def write_atomic(path: Path, data: bytes) -> None:
    """Write via a temp file in the target directory, then rename over ``path``."""
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def _cmd_hide(args, env, out: TextIO) -> int:
    opts = _options(args)
    cover = _read(args.cover)
    secret = _read(args.secret)
    rng = None
    if args.insecure_seed is not None:
        rng = random.Random(args.insecure_seed).randbytes
    result = stego.hide(cover, secret, _password(args, env), opts, rng=rng)
    write_atomic(args.out, result)
    print(f"hid {len(secret)} bytes in {args.out} ({len(result)} bytes, size unchanged)", file=out)
    return EXIT_OK


def _cmd_extract(args, env, out: TextIO) -> int:
    opts = _options(args)
    data = _read(args.stego)
    password = _password(args, env)
    if args.original is not None:
        secret = stego.retract_distortion(data, _read(args.original), password, opts)
    else:
        secret = stego.retract_blind(data, password, opts)
    write_atomic(args.out, secret)
    print(f"extracted {len(secret)} bytes to {args.out}", file=out)
    return EXIT_OK


def _cmd_inspect(args, env, out: TextIO) -> int:
    report = stego.inspect(_read(args.file), _options(args))
    if args.json:
        json.dump(report.to_json(), out, indent=2)
        out.write("\n")
        return EXIT_OK
    print(f"capacity: {report.capacity} bytes ({report.usable} usable for a secret)", file=out)
    print(f"container detected: {'yes' if report.container_detected else 'no'}", file=out)
    print(f"regions ({len(report.regions)}):", file=out)
    for r in report.regions:
        section = f" [{report.section_names[r.section_index]}]" if r.section_index is not None else ""
        print(f"  {r.offset:#010x} +{r.length:#x} {r.kind.value}{section}", file=out)
    if report.validation.valid:
        print("validation: ok", file=out)
    else:
        print("validation findings:", file=out)
        for v in report.validation:
            print(f"  {v}", file=out)
    return EXIT_OK


def _cmd_verify(args, env, out: TextIO) -> int:
    report = pe.validate(pe.parse(_read(args.file), strict=False))
    if report.valid:
        print(f"{args.file}: ok", file=out)
        return EXIT_OK
    for v in report:
        print(f"{args.file}: {v}", file=out)
    return EXIT_PARSE


_COMMANDS = {"hide": _cmd_hide, "extract": _cmd_extract,
             "inspect": _cmd_inspect, "verify": _cmd_verify}


def run(argv: Sequence[str], env: Optional[Mapping[str, str]] = None,
        stdout: Optional[TextIO] = None, stderr: Optional[TextIO] = None) -> int:
    env = os.environ if env is None else env
    out = stdout or sys.stdout
    err = stderr or sys.stderr
    try:
        args = build_parser().parse_args(list(argv))
        return _COMMANDS[args.command](args, env, out)
    except SystemExit as exc:  # --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (UsageError, EmptyPassword) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_USAGE
    except PeFormatError as exc:
        print(f"error: not a usable 32-bit PE file: {exc}", file=err)
        return EXIT_PARSE
    except InsufficientCapacity as exc:
        print(f"error: {exc}", file=err)
        return EXIT_CAPACITY
    except RetractError as exc:
        print(f"error: extraction failed: {exc}", file=err)
        return EXIT_EXTRACT


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
