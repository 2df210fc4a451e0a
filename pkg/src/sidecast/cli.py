"""Command-line driver.

Subcommands: verify (numerical self-checks, PASS/FAIL table), reconstruct
(surface trace from synthetic problems or GRD files), sinc (cardinal-series
surrogate), convergence (error-vs-noise table). Exit codes: 0 success, 1 a
numeric check failed, 2 bad usage or invalid parameter values.

Numerical imports happen inside the commands so that the SIDECAST_THREADS
cap is in place before any BLAS-backed library loads.
"""

from __future__ import annotations

import argparse
import math
import os
import sys


class UsageError(Exception):
    """Bad flag combinations or malformed values; exits with code 2."""


def _apply_thread_cap() -> None:
    """SIDECAST_THREADS=n pins the BLAS/OpenMP pools; 0 or unset leaves the
    libraries' own defaults in place."""
    raw = os.environ.get("SIDECAST_THREADS", "").strip()
    if not raw:
        return
    try:
        n = int(raw)
    except ValueError:
        print("sidecast: ignoring non-integer SIDECAST_THREADS=%r" % raw,
              file=sys.stderr)
        return
    if n <= 0:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ[var] = str(n)


def _parse_grid(text: str):
    """Grid spec "nx,nt,x0,dx,t0,dt" -> GridSpec."""
    from .fields import GridSpec
    toks = [t.strip() for t in str(text).split(",")]
    if len(toks) != 6:
        raise UsageError("grid must be 'nx,nt,x0,dx,t0,dt', got %r" % (text,))
    try:
        nx, nt = int(toks[0]), int(toks[1])
        x0, dx, t0, dt = (float(t) for t in toks[2:])
    except ValueError as exc:
        raise UsageError("bad grid %r: %s" % (text, exc)) from exc
    return GridSpec(x0=x0, dx=dx, nx=nx, t0=t0, dt=dt, nt=nt)


def _parse_points(text: str):
    """Point list "z,r;z,r" -> list of (z, r) floats."""
    pts = []
    for part in str(text).split(";"):
        part = part.strip()
        if not part:
            continue
        toks = part.split(",")
        if len(toks) != 2:
            raise UsageError("points must be 'z,r;z,r;...', got %r" % (text,))
        try:
            pts.append((float(toks[0]), float(toks[1])))
        except ValueError as exc:
            raise UsageError("bad point %r: %s" % (part, exc)) from exc
    if not pts:
        raise UsageError("empty point list %r" % (text,))
    return pts


def _load_config(path: str) -> dict:
    """key=value lines; '#' starts a comment line; later keys win."""
    opts = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise UsageError("%s:%d: expected key=value, got %r"
                                     % (path, lineno, line))
                key, _, val = line.partition("=")
                opts[key.strip()] = val.strip()
    except OSError as exc:
        raise UsageError("cannot read config %s: %s" % (path, exc)) from exc
    return opts


# config key -> (args attribute, caster). Anything else in the file (derived
# quantities a manifest records, for instance) is deliberately ignored, so a
# manifest.txt can reproduce its own run.
_CONFIG_KEYS = {
    "problem": ("problem", str),
    "mode": ("mode", str),
    "epsilon": ("epsilon", float),
    "gamma": ("gamma", float),
    "m": ("m", float),
    "seed": ("seed", int),
    "noise_seed": ("seed", int),
    "data_grid": ("data_grid", str),
    "out_grid": ("grid", str),
    "sinc_n": ("n", int),
    "sinc_kind": ("index_set", str),
    "eps_list": ("eps_list", str),
    "f_file": ("f", str),
    "g_file": ("g", str),
}


def _merge_config(args) -> None:
    if not getattr(args, "config", None):
        return
    opts = _load_config(args.config)
    for key, val in opts.items():
        if key not in _CONFIG_KEYS:
            continue
        attr, cast = _CONFIG_KEYS[key]
        if not hasattr(args, attr) or getattr(args, attr) is not None:
            continue  # flags beat config
        try:
            setattr(args, attr, cast(val))
        except ValueError as exc:
            raise UsageError("config %s: bad value for %s: %s"
                             % (args.config, key, exc)) from exc


def _params_from(args):
    from .regularizer import RegMode, RegParams
    mode_str = (args.mode or "l2").lower()
    try:
        mode = RegMode(mode_str)
    except ValueError:
        raise UsageError("mode must be 'l2' or 'hm', got %r" % (args.mode,))
    if args.epsilon is None:
        raise UsageError("--epsilon is required")
    try:
        if mode is RegMode.L2:
            gamma = 1.0 if args.gamma is None else args.gamma
            return RegParams(epsilon=args.epsilon, gamma=gamma, mode=mode)
        if args.m is None:
            raise UsageError("--m is required in hm mode")
        return RegParams(epsilon=args.epsilon, m=args.m, mode=mode)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _fmt(x: float) -> str:
    return "%.17g" % x


# ---------------------------------------------------------------- verify

def cmd_verify(args) -> int:
    import numpy as np

    from . import harness
    from .kernels import (KernelSpec, R_SPEC, S_SPEC, kernel_l1_norm, s_hat,
                          test_problem)
    from .fields import GridSpec, sample

    quick = args.quick
    checks = []

    # 1. closed-form symbol vs brute-force transform
    if args.points is not None:
        pts = _parse_points(args.points)
    elif quick:
        pts = [(0.0, 0.0), (1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)]
    else:
        pts = None  # full default panel
    closed_form = None
    if args.break_shat:
        # deliberate 5% corruption; the check below must go red
        closed_form = lambda z, r: 1.05 * s_hat(z, r)
    panel = dict(x_half=40.0, dx=0.05, t_max=200.0 if quick else 400.0,
                 dt=0.01 if quick else 0.005)
    rows = harness._symbol_rows(pts, closed_form=closed_form, **panel)
    print("symbol check (quadrature box |x|<=%g, t<=%g, dx=%g, dt=%g):"
          % (panel["x_half"], panel["t_max"], panel["dx"], panel["dt"]))
    print("  %6s %6s  %22s %22s  %10s  %12s" %
          ("z", "r", "closed", "quadrature", "rel_err", "short_form"))
    for row in rows:
        print("  %6g %6g  %22s %22s  %10.3e  %12.5g" %
              (row.z, row.r, "%.6g%+.6gj" % (row.closed.real, row.closed.imag),
               "%.6g%+.6gj" % (row.numeric.real, row.numeric.imag),
               row.rel_err, row.shorthand))
    anchor = next((r for r in rows if (r.z, r.r) == (2.0, 0.0)), None)
    worst_short = max(rows, key=lambda r: r.shorthand_dev)
    noted = []
    if anchor is not None and anchor.shorthand_dev > 1e-2:
        noted.append(anchor)
    if worst_short.shorthand_dev > 1e-2 and worst_short not in noted:
        noted.append(worst_short)
    for row in noted:
        print("  note: the simplified modulus 2*exp(-sqrt(z^4+r^2)) gives "
              "%.4g at (z,r)=(%g,%g) where the true |symbol| is %.4g "
              "(%.0f%% off); it is shown for reference only and never used "
              "by the solver."
              % (row.shorthand, row.z, row.r, abs(row.closed),
                 100 * row.shorthand_dev))
    max_rel = max(r.rel_err for r in rows)
    checks.append(("symbol closed form vs quadrature", max_rel <= 1e-3,
                   "max rel err %.3e (tol 1e-3)" % max_rel))

    # 2. kernel masses against 4*pi/sqrt(c)
    worst_l1 = 0.0
    for spec, target in ((S_SPEC, 4 * math.pi), (R_SPEC, 2 * math.pi),
                         (KernelSpec(16.0), math.pi)):
        rel = abs(kernel_l1_norm(spec) - target) / target
        worst_l1 = max(worst_l1, rel)
    checks.append(("kernel L1 norms vs 4*pi/sqrt(c)", worst_l1 <= 1e-3,
                   "max rel err %.3e (tol 1e-3)" % worst_l1))

    # 3. convolution factor: 2*pi beats 1 by an order of magnitude
    if quick:
        dg = harness.default_data_grid(nx=257, nt=800, dt=0.05)
    else:
        dg = harness.default_data_grid()
    res_2pi, res_one = harness.kappa_calibration(data_grid=dg)
    ratio = res_one / max(res_2pi, np.finfo(float).tiny)
    checks.append(("transform factor 2*pi vs 1", ratio >= 10.0,
                   "residuals %.3e / %.3e, ratio %.1f (need >= 10)"
                   % (res_2pi, res_one, ratio)))

    # 4. convolution identity on both exact problems
    n_id = 33 if quick else 65
    worst_id = 0.0
    for pid, x_lo, x_hi in (("P1", 0.25, 1.3), ("P2", 0.0, 1.0)):
        prob = test_problem(pid)
        window = GridSpec(x0=x_lo, dx=(x_hi - x_lo) / (n_id - 1), nx=n_id,
                          t0=0.1, dt=(4.0 - 0.1) / (n_id - 1), nt=n_id)
        in_grid, out_grid = harness.refined_window_grid(window)
        v = sample(prob.v_exact, in_grid)
        f = sample(prob.f0, in_grid)
        g = sample(prob.g0, in_grid)
        resid = harness.identity_residual(v, f, g, out_grid)
        print("identity residual %s: %.3e" % (pid, resid))
        worst_id = max(worst_id, resid)
    checks.append(("convolution identity residual", worst_id <= 1e-2,
                   "max over P1, P2: %.3e (tol 1e-2)" % worst_id))

    print()
    width = max(len(name) for name, _, _ in checks)
    ok_all = True
    for name, ok, detail in checks:
        ok_all &= ok
        print("%-*s  %s  %s" % (width, name, "PASS" if ok else "FAIL", detail))
    print("overall: %s" % ("PASS" if ok_all else "FAIL"))
    return 0 if ok_all else 1


# ----------------------------------------------------------- reconstruct

def _write_file_mode_manifest(path, args, params, region, report, f_grid,
                              out_grid):
    from .harness import _grid_str
    from .regularizer import CONVOLUTION_FACTOR
    lines = ["f_file=%s" % args.f, "g_file=%s" % args.g,
             "mode=%s" % params.mode.value,
             "epsilon=%s" % _fmt(params.epsilon)]
    if params.gamma is not None:
        lines.append("gamma=%s" % _fmt(params.gamma))
    if params.m is not None:
        lines.append("m=%s" % _fmt(params.m))
    lines.append("data_grid=%s" % _grid_str(f_grid))
    lines.append("out_grid=%s" % _grid_str(out_grid))
    if region.b_eps is not None:
        lines.append("b_eps=%s" % _fmt(region.b_eps))
    if region.a_eps is not None:
        lines.append("a_eps=%s" % _fmt(region.a_eps))
    lines.append("kappa=%s" % _fmt(CONVOLUTION_FACTOR))
    lines.append("C=%s" % _fmt(report.C))
    if report.bound_l2 is not None:
        lines.append("bound_l2=%s" % _fmt(report.bound_l2))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_reconstruct(args) -> int:
    from . import harness
    from .fields import read_field, write_csv, write_field
    from .regularizer import reconstruct, region_for

    _merge_config(args)
    params = _params_from(args)
    out_dir = args.out
    file_mode = args.f is not None or args.g is not None
    if file_mode and args.problem:
        raise UsageError("give either --problem or --f/--g, not both")

    if file_mode:
        if not (args.f and args.g):
            raise UsageError("file input needs both --f and --g")
        f = read_field(args.f)
        g = read_field(args.g)
        if f.grid != g.grid:
            raise UsageError("f and g grids differ")
        if args.grid is None:
            raise UsageError("--grid (output grid) is required with file "
                             "input")
        out_grid = _parse_grid(args.grid)
        v_eps, report = reconstruct(f, g, params, out_grid)
        os.makedirs(out_dir, exist_ok=True)
        write_field(v_eps, os.path.join(out_dir, "v_eps.grd"))
        write_csv(v_eps, os.path.join(out_dir, "v_eps.csv"))
        _write_file_mode_manifest(os.path.join(out_dir, "manifest.txt"),
                                  args, params, region_for(params), report,
                                  f.grid, out_grid)
        if report.bound_l2 is not None:
            print("bound_l2 (tail-free part): %s" % _fmt(report.bound_l2))
        print("wrote v_eps.grd, v_eps.csv, manifest.txt to %s" % out_dir)
        return 0

    if args.problem is None:
        raise UsageError("need a data source: --problem p1|p2 or --f/--g")
    data_grid = _parse_grid(args.data_grid) if args.data_grid \
        else harness.default_data_grid()
    out_grid = _parse_grid(args.grid) if args.grid \
        else harness.default_out_grid(args.problem)
    cfg = harness.ExperimentConfig(problem=args.problem.upper(),
                                   params=params, data_grid=data_grid,
                                   out_grid=out_grid,
                                   noise_seed=args.seed or 0)
    res = harness.run_experiment(cfg, out_dir=out_dir)
    print("measured_error=%s" % _fmt(res.measured_error))
    if res.report.bound_l2 is not None:
        print("bound_l2=%s" % _fmt(res.report.bound_l2))
    print("eta_hat=%s" % _fmt(res.eta_hat))
    print("wrote v_eps.grd, v_eps.csv, manifest.txt to %s" % out_dir)
    return 0


# ------------------------------------------------------------------ sinc

def cmd_sinc(args) -> int:
    import numpy as np

    from . import harness
    from .fields import RealField, read_field, write_csv
    from .kernels import test_problem
    from .regularizer import reconstruct_spectrum
    from .sinc import (IndexSetKind, band_halfwidth, build_expansion,
                       eval_expansion, write_expansion)
    from .transform import idft2_windowed_at

    _merge_config(args)
    params = _params_from(args)
    if args.n is None:
        raise UsageError("--N (index radius) is required")
    if args.n < 1:
        raise UsageError("--N must be a positive index radius, got %d"
                         % args.n)
    try:
        kind = IndexSetKind((args.index_set or "square").lower())
    except ValueError:
        raise UsageError("index set must be 'square' or 'triangular'")
    a_eps = band_halfwidth(params)
    out_dir = args.out

    if args.v_eps is not None:
        # surrogate path: coefficients are bilinear samples of a stored
        # reconstruction, so lattice exactness holds only where the lattice
        # happens to hit the file's nodes
        from scipy.interpolate import RegularGridInterpolator
        field = read_field(args.v_eps)
        itp = RegularGridInterpolator(
            (field.grid.x_nodes(), field.grid.t_nodes()), field.values,
            bounds_error=False, fill_value=0.0)

        def ev(x, t):
            xb, tb = np.broadcast_arrays(np.asarray(x, float),
                                         np.asarray(t, float))
            return itp(np.stack([xb, tb], axis=-1))

        exp = build_expansion(ev, a_eps, args.n, kind)
        eval_grid = field.grid
        dev = None
    else:
        if args.problem is None:
            raise UsageError("need a source: --problem or --v-eps FILE")
        prob = test_problem(args.problem)
        data_grid = _parse_grid(args.data_grid) if args.data_grid \
            else harness.default_data_grid()
        eval_grid = _parse_grid(args.grid) if args.grid \
            else harness.default_out_grid(args.problem)
        seed = args.seed or 0
        f = harness.perturb(harness.sample(prob.f0, data_grid),
                            params.epsilon, seed)
        g = harness.perturb(harness.sample(prob.g0, data_grid),
                            params.epsilon, seed + harness._G_SEED_OFFSET)
        v_hat, region = reconstruct_spectrum(f, g, params)

        def ev(x, t):
            return idft2_windowed_at(v_hat, region.window, x, t)

        exp = build_expansion(ev, a_eps, args.n, kind)
        dev = harness.sinc_deviation(exp, v_hat, region, eval_grid)

    os.makedirs(out_dir, exist_ok=True)
    write_expansion(os.path.join(out_dir, "sinc.txt"), exp)
    xs, ts = np.meshgrid(eval_grid.x_nodes(), eval_grid.t_nodes(),
                         indexing="ij")
    series = eval_expansion(exp, xs.ravel(), ts.ravel())
    write_csv(RealField(eval_grid, series.reshape(eval_grid.shape)),
              os.path.join(out_dir, "sinc_eval.csv"))

    print("mesh d=%s, %d coefficients (%s, N=%d)"
          % (_fmt(exp.d), exp.values.size, kind.value, args.n))
    if dev is not None:
        print("relative l2 deviation from the windowed inverse over 200 "
              "points: %s" % _fmt(dev))
    if kind is IndexSetKind.TRIANGULAR:
        # how much series mass the triangular truncation discards
        sq = build_expansion(ev, a_eps, args.n, IndexSetKind.SQUARE)
        dropped = np.abs(sq.ms) > np.abs(sq.ns)
        energy = exp.d * exp.d * float(np.sum(sq.values[dropped] ** 2))
        print("dropped-index energy (square minus triangular): %s"
              % _fmt(energy))
    print("wrote sinc.txt, sinc_eval.csv to %s" % out_dir)
    return 0


# ----------------------------------------------------------- convergence

def cmd_convergence(args) -> int:
    from . import harness

    _merge_config(args)
    if args.eps_list is None:
        raise UsageError("--eps-list is required (comma-separated)")
    try:
        eps = [float(t) for t in str(args.eps_list).split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError("bad --eps-list: %s" % exc) from exc
    if not eps:
        raise UsageError("--eps-list is empty")
    problem = (args.problem or "p1").upper()
    gamma = 1.0 if args.gamma is None else args.gamma
    data_grid = _parse_grid(args.data_grid) if args.data_grid else None
    out_grid = _parse_grid(args.grid) if args.grid else None
    try:
        rows = harness.convergence_table(problem, gamma, eps,
                                         seed=args.seed or 0,
                                         data_grid=data_grid,
                                         out_grid=out_grid)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "convergence.csv")
    harness.write_convergence_csv(rows, path)
    print("%12s %14s %14s %12s" % ("epsilon", "measured", "bound", "eta_hat"))
    for row in rows:
        print("%12.4e %14.6e %14.6e %12.4e"
              % (row.epsilon, row.measured_error, row.bound, row.eta_hat))
    print("wrote %s" % path)
    return 0


# ------------------------------------------------------------------ main

def _add_common_model_flags(p):
    p.add_argument("--config", help="key=value file; flags take precedence")
    p.add_argument("--problem", help="built-in problem id (p1 or p2)")
    p.add_argument("--epsilon", type=float, help="noise level")
    p.add_argument("--gamma", type=float,
                   help="cutoff exponent in (0,2), l2 mode (default 1)")
    p.add_argument("--m", type=float, help="Sobolev order, hm mode")
    p.add_argument("--mode", choices=["l2", "hm"], help="cutoff mode")
    p.add_argument("--seed", type=int, help="noise seed (default 0)")
    p.add_argument("--data-grid", dest="data_grid",
                   help="measurement grid 'nx,nt,x0,dx,t0,dt'")
    p.add_argument("--grid", help="output grid 'nx,nt,x0,dx,t0,dt'")
    p.add_argument("--out", default="sidecast_out", help="output directory")


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sidecast",
        description="Surface temperature reconstruction from interior "
                    "histories of a conducting strip.")
    sub = p.add_subparsers(dest="command", required=True)

    pv = sub.add_parser("verify", help="run the numerical self-checks")
    pv.add_argument("--points", help="symbol probe points 'z,r;z,r;...'")
    pv.add_argument("--break-shat", dest="break_shat", action="store_true",
                    help="corrupt the closed-form symbol to prove the check "
                         "can fail")
    pv.add_argument("--quick", action="store_true",
                    help="coarser geometry, same tolerances")
    pv.set_defaults(func=cmd_verify)

    pr = sub.add_parser("reconstruct", help="recover the surface trace")
    _add_common_model_flags(pr)
    pr.add_argument("--f", help="GRD file with the depth-1 history")
    pr.add_argument("--g", help="GRD file with the depth-2 history")
    pr.set_defaults(func=cmd_reconstruct)

    ps = sub.add_parser("sinc", help="cardinal-series surrogate")
    _add_common_model_flags(ps)
    ps.add_argument("--N", dest="n", type=int, help="index radius")
    ps.add_argument("--index-set", dest="index_set",
                    choices=["square", "triangular"])
    ps.add_argument("--v-eps", dest="v_eps",
                    help="GRD file of a stored reconstruction to expand "
                         "(bilinear surrogate) instead of reconstructing")
    ps.set_defaults(func=cmd_sinc)

    pc = sub.add_parser("convergence", help="error-vs-noise table")
    _add_common_model_flags(pc)
    pc.add_argument("--eps-list", dest="eps_list",
                    help="comma-separated noise levels")
    pc.set_defaults(func=cmd_convergence)
    return p


def main(argv=None) -> int:
    _apply_thread_cap()
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print("sidecast: %s" % exc, file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print("sidecast: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
