#!/usr/bin/env python3
"""Initial-data perturbation study on the reference benchmark.

Perturbs the first component's initial velocity by decreasing L2 sizes and
reports the sup-in-time solution gap per size; near-constant gap/size ratios
indicate a Lipschitz-stable regime.
"""

import argparse

from multifluid1d.workflows import cmd_stability, reference_config


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=256)
    parser.add_argument("--t-final", type=float, default=1.0)
    parser.add_argument("--deltas", default="1e-3,1e-4,1e-5")
    args = parser.parse_args()
    config = reference_config(n=args.n, t_final=args.t_final, snapshot_stride=1)
    deltas = [float(v) for v in args.deltas.split(",")]
    for line in cmd_stability(config, deltas).lines():
        print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
