"""Sinc-series representation of the band-limited reconstruction.

The regularized spectrum vanishes outside the cutoff region, so the
reconstruction is band-limited and equals its own cardinal series on the
mesh d = pi / a, a the band half-width. Truncating the series to a finite
index set gives a compact, serializable surrogate that is exact at the
lattice nodes by construction.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .regularizer import RegMode, RegParams, cutoff_hm, cutoff_l2

__all__ = [
    "IndexSetKind",
    "SincExpansion",
    "cardinal",
    "band_halfwidth",
    "sinc_mesh",
    "index_lattice",
    "build_expansion",
    "eval_expansion",
    "write_expansion",
    "read_expansion",
]


def cardinal(p, d, z):
    """p-th cardinal function on mesh d: sin(pi (z - p d)/d) / (pi (z - p d)/d).

    Equals 1 at z = p d and 0 at every other lattice node.
    """
    if not d > 0:
        raise ValueError("mesh spacing d must be positive, got %r" % (d,))
    return np.sinc((np.asarray(z, dtype=float) - np.asarray(p) * d) / d)


class IndexSetKind(enum.Enum):
    SQUARE = "square"          # |m| <= N, |n| <= N
    TRIANGULAR = "triangular"  # |m| <= |n| <= N


def band_halfwidth(params: RegParams) -> float:
    """Square band half-width a covering the cutoff region.

    HM mode uses the square half-width directly; L2 mode must cover the
    rectangle (half-widths b and b^2), so the larger of the two sets the
    band.
    """
    if params.mode is RegMode.HM:
        return cutoff_hm(params.epsilon, params.m)
    b = cutoff_l2(params.epsilon, params.gamma)
    return max(b, b * b)


def sinc_mesh(params: RegParams) -> float:
    """Mesh spacing d = pi / a for the band of the cutoff region."""
    return math.pi / band_halfwidth(params)


def index_lattice(kind: IndexSetKind, n: int):
    """Index pairs (m, n) of the truncated series, as two int arrays.

    SQUARE has (2N+1)^2 pairs. TRIANGULAR keeps |m| <= |n| <= N, which is
    2N^2 + 4N + 1 pairs: the time index dominates because the band-limited
    spectrum decays faster along the space frequency.
    """
    if n < 0:
        raise ValueError("index radius N must be >= 0, got %r" % (n,))
    rng = np.arange(-n, n + 1)
    if kind is IndexSetKind.SQUARE:
        ms, ns = np.meshgrid(rng, rng, indexing="ij")
        return ms.ravel(), ns.ravel()
    if kind is IndexSetKind.TRIANGULAR:
        ms, ns = np.meshgrid(rng, rng, indexing="ij")
        keep = np.abs(ms) <= np.abs(ns)
        return ms[keep].ravel(), ns[keep].ravel()
    raise ValueError("unknown index set kind %r" % (kind,))


@dataclass(frozen=True)
class SincExpansion:
    """Truncated cardinal series: sum of values[i] * S(ms[i]) * S(ns[i])."""

    d: float
    kind: IndexSetKind
    n: int
    ms: np.ndarray
    ns: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError("mesh spacing d must be positive")
        ms = np.ascontiguousarray(np.asarray(self.ms, dtype=int))
        ns = np.ascontiguousarray(np.asarray(self.ns, dtype=int))
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        if not (ms.shape == ns.shape == vals.shape) or ms.ndim != 1:
            raise ValueError("index and value arrays must be equal-length 1-d")
        if not np.all(np.isfinite(vals)):
            raise ValueError("expansion coefficients must be finite")
        for name, arr in (("ms", ms), ("ns", ns), ("values", vals)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def coeff(self, m: int, p: int) -> float:
        hit = np.flatnonzero((self.ms == m) & (self.ns == p))
        if hit.size == 0:
            raise KeyError("index (%d, %d) not in the expansion" % (m, p))
        return float(self.values[hit[0]])


def build_expansion(v_eval, a_eps: float, n: int,
                    kind: IndexSetKind = IndexSetKind.SQUARE) -> SincExpansion:
    """Sample the evaluator at the lattice (m d, n d), d = pi/a_eps, and
    store coefficients. a_eps is the band half-width the evaluator was
    truncated to, so the mesh is exactly the Nyquist spacing for it.

    v_eval maps equal-length point arrays (x, t) to values; the band-limited
    reconstruction's windowed-transform evaluator is the intended argument.
    Time nodes with n < 0 are legitimate: the band-limited extension exists
    on the whole plane even though the data live on t > 0.
    """
    if not a_eps > 0:
        raise ValueError("band half-width a_eps must be positive, got %r"
                         % (a_eps,))
    if n < 1:
        raise ValueError("index radius N must be >= 1, got %r" % (n,))
    d = math.pi / a_eps
    ms, ns = index_lattice(kind, n)
    vals = np.asarray(v_eval(ms * d, ns * d), dtype=float)
    if vals.shape != ms.shape:
        raise ValueError("evaluator returned shape %r for %d nodes"
                         % (vals.shape, ms.size))
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        i = bad[0]
        raise ValueError("evaluator returned a non-finite value at lattice "
                         "index (m=%d, n=%d)" % (ms[i], ns[i]))
    return SincExpansion(d=d, kind=kind, n=n, ms=ms, ns=ns, values=vals)


def eval_expansion(exp: SincExpansion, x, t):
    """Evaluate the truncated series at points (x, t), broadcasting scalars.

    Points are processed in blocks so the cardinal matrices stay a few tens
    of MB even for N=50 lattices against full evaluation grids.
    """
    scalar = np.isscalar(x) and np.isscalar(t)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    xs, ts = np.broadcast_arrays(xs, ts)
    shape = xs.shape
    xf, tf = xs.ravel(), ts.ravel()
    out = np.empty(xf.shape)
    step = max(1, (1 << 22) // max(exp.values.size, 1))
    for i0 in range(0, xf.size, step):
        sl = slice(i0, i0 + step)
        card_x = np.sinc(xf[sl, None] / exp.d - exp.ms[None, :])
        card_t = np.sinc(tf[sl, None] / exp.d - exp.ns[None, :])
        out[sl] = (card_x * card_t) @ exp.values
    out = out.reshape(shape)
    return float(out.reshape(-1)[0]) if scalar else out


def write_expansion(path, exp: SincExpansion) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("%.17g %d %s\n" % (exp.d, exp.n, exp.kind.value))
        for m, p, v in zip(exp.ms, exp.ns, exp.values):
            fh.write("%d %d %.17g\n" % (m, p, v))


def read_expansion(path) -> SincExpansion:
    """Inverse of write_expansion; round-trips losslessly at 17 digits."""
    path = str(path)
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.readlines()
    header = None
    ms, ns, vals = [], [], []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or (header is None and line.startswith("#")):
            continue
        toks = line.split()
        if header is None:
            if len(toks) != 3:
                raise ValueError("%s:%d: expected header 'd N kind', got %r"
                                 % (path, lineno, line))
            try:
                d = float(toks[0])
                n = int(toks[1])
                kind = IndexSetKind(toks[2])
            except (ValueError, KeyError) as exc:
                raise ValueError("%s:%d: bad header: %s"
                                 % (path, lineno, exc)) from exc
            header = (d, n, kind)
            continue
        if len(toks) != 3:
            raise ValueError("%s:%d: expected 'm n value', got %r"
                             % (path, lineno, line))
        try:
            ms.append(int(toks[0]))
            ns.append(int(toks[1]))
            vals.append(float(toks[2]))
        except ValueError as exc:
            raise ValueError("%s:%d: bad row: %s" % (path, lineno, exc)) from exc
    if header is None:
        raise ValueError("%s: no header line found" % path)
    d, n, kind = header
    expect_m, _ = index_lattice(kind, n)
    if len(vals) != expect_m.size:
        raise ValueError("%s: expected %d coefficient rows for %s N=%d, "
                         "found %d" % (path, expect_m.size, kind.value, n,
                                       len(vals)))
    return SincExpansion(d=d, kind=kind, n=n, ms=np.array(ms, dtype=int),
                         ns=np.array(ns, dtype=int),
                         values=np.array(vals, dtype=float))
