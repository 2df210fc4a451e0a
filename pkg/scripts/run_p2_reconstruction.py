#!/usr/bin/env python3
"""Sign-identity reconstruction: second exact problem, whose surface trace
is exactly the negated depth-2 history. Writes v_eps.grd, v_eps.csv and a
manifest that reproduces the run."""

import argparse
import sys

from sidecast.cli import main


def run() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epsilon", type=float, default=0.02)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/p2_reconstruction")
    ap.add_argument("--data-grid", default=None,
                    help="'nx,nt,x0,dx,t0,dt' override for quick runs")
    ap.add_argument("--grid", default=None, help="output grid override")
    a = ap.parse_args()
    argv = ["reconstruct", "--problem", "p2", "--epsilon", str(a.epsilon),
            "--seed", str(a.seed), "--out", a.out]
    if a.data_grid:
        argv += ["--data-grid", a.data_grid]
    if a.grid:
        argv += ["--grid", a.grid]
    return main(argv)


if __name__ == "__main__":
    sys.exit(run())
