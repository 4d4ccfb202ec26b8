#!/usr/bin/env python3
"""Regenerate the headline data files for the built-in example.

Writes fig1.csv (shift, risk, and gradient profiles), fig2.csv (curvature
constants versus ball radius), and constants.json (field crossings, r = 0.4
constants, feasible radius) under --out, then prints the headline numbers.
"""

import argparse
import json
from pathlib import Path

from perflow.cli import main as perflow_main


def run(out: str) -> None:
    for target in ("fig1", "fig2", "constants"):
        code = perflow_main(["repro", target, "--out", out])
        if code != 0:
            raise SystemExit(code)
    numbers = json.loads((Path(out) / "constants.json").read_text())
    print(f"wrote fig1.csv, fig2.csv, constants.json under {out}/")
    for key in ("rgd_crossing", "prm_crossing", "c1", "c2", "feasible_radius"):
        print(f"  {key:>16} = {numbers[key]:.6f}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="repro_out", help="output directory")
    run(parser.parse_args().out)
