#!/usr/bin/env python3
"""Noise-level sweep for the first exact problem: reconstruction error vs
the a-priori bound across epsilon, written to convergence.csv."""

import argparse
import sys

from sidecast.cli import main


def run() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gamma", type=float, default=1.0)
    ap.add_argument("--eps-list", default="0.04,0.02,0.01,0.005")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/p1_convergence")
    ap.add_argument("--data-grid", default=None,
                    help="'nx,nt,x0,dx,t0,dt' override for quick runs")
    a = ap.parse_args()
    argv = ["convergence", "--problem", "p1", "--gamma", str(a.gamma),
            "--eps-list", a.eps_list, "--seed", str(a.seed), "--out", a.out]
    if a.data_grid:
        argv += ["--data-grid", a.data_grid]
    return main(argv)


if __name__ == "__main__":
    sys.exit(run())
