#!/usr/bin/env python3
"""Cardinal-series surrogate of the first problem's reconstruction with
both index sets, side by side: the full square lattice (default solver
choice) and the triangular |m| <= |n| subset, whose dropped-index energy
the sinc command reports."""

import argparse
import os
import sys

from sidecast.cli import main


def run() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", dest="n", type=int, default=50)
    ap.add_argument("--epsilon", type=float, default=0.02)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/sinc_comparison")
    ap.add_argument("--data-grid", default=None,
                    help="'nx,nt,x0,dx,t0,dt' override for quick runs")
    a = ap.parse_args()
    rc = 0
    for kind in ("square", "triangular"):
        print("== index set: %s ==" % kind)
        argv = ["sinc", "--problem", "p1", "--epsilon", str(a.epsilon),
                "--N", str(a.n), "--seed", str(a.seed),
                "--index-set", kind, "--out", os.path.join(a.out, kind)]
        if a.data_grid:
            argv += ["--data-grid", a.data_grid]
        rc = max(rc, main(argv))
    return rc


if __name__ == "__main__":
    sys.exit(run())
