"""Command-line entry point: ``iontfim <kind> --config FILE --out DIR``."""
from __future__ import annotations

import argparse
import os
import sys

from .. import __version__
from ..errors import ConfigError
from .config import KINDS, load_config, with_seed
from .runner import exit_code, run

THREADS_ENV = "IONTFIM_THREADS"


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v <= 2**64 - 1:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iontfim", description="Trapped-ion transverse-field Ising chain simulator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="kind", required=True, metavar="{" + ",".join(KINDS) + "}")
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        p.add_argument("--config", required=True, help="YAML config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--threads", type=int, default=None, help=f"worker threads (default: ${THREADS_ENV} or 1)")
        p.add_argument("--seed", type=_u64, default=None, help="master seed, overrides the config")
    return parser


def _threads(flag: int | None) -> int:
    if flag is not None:
        return flag
    env = os.environ.get(THREADS_ENV)
    if not env:
        return 1
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"invalid value for {THREADS_ENV}: {env!r}") from None


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = with_seed(load_config(args.config, args.kind), args.seed)
        manifest = run(config, args.out, _threads(args.threads))
    except Exception as e:
        code = exit_code(e)
        if code == 1:
            raise
        print(f"iontfim: error: {e}", file=sys.stderr)
        return code
    print(f"iontfim: wrote {len(manifest['files'])} files to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
