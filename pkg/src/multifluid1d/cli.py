"""Command-line entry points: simulate, verify, convergence, stability."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .archive import ArchiveError
from .config import ConfigError, load_config
from .workflows import (
    EXIT_CONFIG,
    EXIT_OK,
    cmd_convergence,
    cmd_simulate,
    cmd_stability,
    cmd_verify,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multifluid1d",
        description="1D viscous compressible multifluid solver and verification harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a solver and write an archive")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--coords", choices=["euler", "lagrange", "both"], default=None)
    p_sim.add_argument("--out", default=None, help="output directory (default runs/<label>)")

    p_ver = sub.add_parser("verify", help="re-run the invariant suite on an archive")
    p_ver.add_argument("--archive", required=True)
    p_ver.add_argument("--config", required=True)

    p_con = sub.add_parser("convergence", help="grid convergence study")
    p_con.add_argument("--config", required=True)
    p_con.add_argument("--levels", default="64,128,256", help="comma-separated grid sizes")
    p_con.add_argument("--mms", action="store_true", help="manufactured-solution mode")
    p_con.add_argument("--out", default=None, help="optional JSON output path")

    p_sta = sub.add_parser("stability", help="initial-data perturbation study")
    p_sta.add_argument("--config", required=True)
    p_sta.add_argument("--deltas", default="1e-3,1e-4,1e-5", help="comma-separated sizes")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "simulate":
            out = Path(args.out) if args.out else Path("runs") / config.label
            code = cmd_simulate(config, out, coords=args.coords)
            print(f"archive written to {out}")
            return code
        if args.command == "verify":
            code, report = cmd_verify(args.archive, config)
            for line in report.lines():
                print(line)
            return code
        if args.command == "convergence":
            levels = [int(v) for v in args.levels.split(",")]
            table = cmd_convergence(
                config, levels, mms=args.mms, out=Path(args.out) if args.out else None
            )
            for line in table.lines():
                print(line)
            return EXIT_OK
        if args.command == "stability":
            deltas = [float(v) for v in args.deltas.split(",")]
            table = cmd_stability(config, deltas)
            for line in table.lines():
                print(line)
            return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArchiveError as exc:
        print(f"archive error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    raise AssertionError("unreachable")


if __name__ == "__main__":
    raise SystemExit(main())
