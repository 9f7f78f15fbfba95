#!/usr/bin/env python3
"""Run the reference benchmark in both coordinate systems and verify it.

Writes two archives plus a comparison summary under --out, then re-runs the
invariant suite on each archive and prints the verdict lines.
"""

import argparse
from pathlib import Path

from multifluid1d.workflows import cmd_simulate, cmd_verify, reference_config


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=256)
    parser.add_argument("--t-final", type=float, default=1.0)
    parser.add_argument("--stride", type=int, default=1)
    parser.add_argument("--out", default="runs/reference")
    args = parser.parse_args()

    config = reference_config(
        n=args.n, t_final=args.t_final, snapshot_stride=args.stride, coords="both"
    )
    out = Path(args.out)
    code = cmd_simulate(config, out)
    print(f"simulate exit code: {code}")

    worst = code
    for coords in ("euler", "lagrange"):
        verify_code, report = cmd_verify(out / coords, config)
        print(f"--- {coords} ---")
        for line in report.lines():
            print(line)
        worst = max(worst, verify_code)
    return worst


if __name__ == "__main__":
    raise SystemExit(main())
