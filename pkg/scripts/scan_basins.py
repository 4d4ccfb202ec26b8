#!/usr/bin/env python3
"""Map basins of attraction of both flows for the built-in example.

For each flow this locates the equilibria, integrates a grid of initial
conditions, and prints the basin boundaries next to the unstable root they
should straddle.  CSV/JSON artifacts land under --out/<flow>/.
"""

import argparse

import numpy as np

import perflow as pf
from perflow.cli import main as perflow_main
from perflow.equilibria import UNSTABLE


def run(grid: int, t_end: float, out: str) -> None:
    model = pf.BernoulliSquaredModel(shift=pf.bump_shift())
    for flow in ("rgd", "prm"):
        code = perflow_main(
            ["basins", "--flow", flow, "--grid", str(grid), "--t-end", str(t_end),
             "--out", f"{out}/{flow}"]
        )
        if code != 0:
            raise SystemExit(code)
        reports = pf.find_equilibria(model, flow, grid_n=grid)
        unstable = [r for r in reports if UNSTABLE in r.labels]
        basin = pf.basin_scan(model, flow, reports, grid_n=grid, t_end=t_end)
        boundaries = [b["boundary"] for b in pf.basin_boundaries(basin)]
        root = unstable[0].location[0] if unstable else np.nan
        print(f"{flow}: boundaries at {boundaries}, unstable root at {root:.6f}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--grid", type=int, default=2001)
    parser.add_argument("--t-end", type=float, default=60.0)
    parser.add_argument("--out", default="basin_out")
    args = parser.parse_args()
    run(args.grid, args.t_end, args.out)
