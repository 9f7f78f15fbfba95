#!/usr/bin/env python3
"""Grid convergence studies on the reference benchmark.

Runs the manufactured-solution study (observed orders per field) and the
cross-coordinate mutual-verification study (sup-in-time distance between the
two solvers per level).
"""

import argparse

from multifluid1d.workflows import cross_convergence, mms_convergence, reference_config


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--levels", default="64,128,256")
    parser.add_argument("--t-final", type=float, default=1.0)
    parser.add_argument("--skip-mms", action="store_true")
    parser.add_argument("--skip-cross", action="store_true")
    args = parser.parse_args()
    levels = [int(v) for v in args.levels.split(",")]
    config = reference_config(n=levels[-1], t_final=args.t_final, snapshot_stride=1)

    if not args.skip_mms:
        for line in mms_convergence(config, levels).lines():
            print(line)
    if not args.skip_cross:
        for line in cross_convergence(config, levels).lines():
            print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
