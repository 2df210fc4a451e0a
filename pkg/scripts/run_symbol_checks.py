#!/usr/bin/env python3
"""Numerical self-checks: closed-form symbol vs quadrature, kernel masses,
transform-factor calibration, and the convolution identity on both exact
problems. Thin wrapper over `python3 -m sidecast.cli verify`."""

import argparse
import sys

from sidecast.cli import main


def run() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--quick", action="store_true",
                    help="coarser geometry, same tolerances")
    ap.add_argument("--points", default=None,
                    help="symbol probe points 'z,r;z,r;...'")
    ap.add_argument("--break-shat", action="store_true",
                    help="corrupt the symbol to show the check going red")
    a = ap.parse_args()
    argv = ["verify"]
    if a.quick:
        argv.append("--quick")
    if a.points:
        argv += ["--points", a.points]
    if a.break_shat:
        argv.append("--break-shat")
    return main(argv)


if __name__ == "__main__":
    sys.exit(run())
