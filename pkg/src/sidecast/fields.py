"""Uniform-grid field containers over (x, t) or (z, r) rectangles, discrete
L2 norms matching the rectangle-rule quadrature used everywhere else, and
plain-text grid file I/O (GRD and CSV)."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GridSpec",
    "RealField",
    "ComplexField",
    "sample",
    "l2_norm",
    "l2_distance",
    "write_field",
    "read_field",
    "write_csv",
]

# Round-trips float64 exactly in decimal text.
_FMT = "%.17g"


@dataclass(frozen=True)
class GridSpec:
    """Uniform rectangular grid; node (i, j) sits at (x0 + i*dx, t0 + j*dt).

    The first axis is called x and the second t by convention, but spectral
    grids use the same container with (z, r) in those slots.
    """

    x0: float
    dx: float
    nx: int
    t0: float
    dt: float
    nt: int

    def __post_init__(self):
        if not (self.dx > 0.0 and self.dt > 0.0):
            raise ValueError("grid steps must be positive, got dx=%r dt=%r"
                             % (self.dx, self.dt))
        if self.nx < 2 or self.nt < 2:
            raise ValueError("grid needs at least 2 nodes per axis, got nx=%r nt=%r"
                             % (self.nx, self.nt))

    def x_nodes(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.nx)

    def t_nodes(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.nt)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.nt)

    @property
    def cell_area(self) -> float:
        return self.dx * self.dt

    @classmethod
    def centered(cls, xmax: float, nx: int, tmax: float, nt: int) -> "GridSpec":
        """Symmetric grid over [-xmax, xmax] x [-tmax, tmax].

        Odd node counts place a node exactly at the origin, which keeps
        conjugate symmetry of transforms of real fields at rounding level.
        """
        if xmax <= 0 or tmax <= 0:
            raise ValueError("centered grid needs positive half-extents")
        dx = 2.0 * xmax / (nx - 1)
        dt = 2.0 * tmax / (nt - 1)
        return cls(-xmax, dx, nx, -tmax, dt, nt)


def _frozen_array(values, dtype) -> np.ndarray:
    a = np.ascontiguousarray(values, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RealField:
    """Immutable float64 samples on a GridSpec; values[i, j] = value at
    (x_i, t_j)."""

    grid: GridSpec
    values: np.ndarray

    _dtype = np.float64

    def __post_init__(self):
        v = np.asarray(self.values, dtype=self._dtype)
        if v.ndim == 1 and v.size == self.grid.nx * self.grid.nt:
            v = v.reshape(self.grid.shape)
        if v.shape != self.grid.shape:
            raise ValueError("values shape %r does not match grid %r"
                             % (v.shape, self.grid.shape))
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", _frozen_array(v, self._dtype))


@dataclass(frozen=True, eq=False)
class ComplexField(RealField):
    _dtype = np.complex128


def sample(fn, grid: GridSpec) -> RealField:
    """Evaluate fn(x, t) at every node.

    Tries one vectorized call over meshgrids first and falls back to a per
    node loop for scalar-only evaluators. A non-finite value anywhere is an
    error naming the offending node.
    """
    X, T = np.meshgrid(grid.x_nodes(), grid.t_nodes(), indexing="ij")
    vals = None
    try:
        out = np.asarray(fn(X, T), dtype=np.float64)
        if out.shape == X.shape:
            vals = out
    except (TypeError, ValueError):
        vals = None
    if vals is None:
        vals = np.array([[float(fn(x, t)) for t in grid.t_nodes()]
                         for x in grid.x_nodes()])
    bad = ~np.isfinite(vals)
    if bad.any():
        i, j = map(int, np.argwhere(bad)[0])
        raise ValueError(
            "evaluator returned non-finite value at node (i=%d, j=%d), "
            "x=%.17g, t=%.17g" % (i, j, X[i, j], T[i, j]))
    return RealField(grid, vals)


def l2_norm(field) -> float:
    """Rectangle-rule L2 norm: sqrt(dx*dt*sum |values|^2)."""
    v = field.values
    return float(np.sqrt(field.grid.cell_area * np.sum(np.abs(v) ** 2)))


def l2_distance(a, b) -> float:
    if a.grid != b.grid:
        raise ValueError("grid mismatch: %r vs %r" % (a.grid, b.grid))
    diff = a.values - b.values
    return float(np.sqrt(a.grid.cell_area * np.sum(np.abs(diff) ** 2)))


class GrdParseError(ValueError):
    """Malformed GRD file; message carries the 1-based line number."""


def write_field(field: RealField, path) -> None:
    """GRD text format: header "nx nt x0 dx t0 dt", then nt lines of nx
    values (line j holds the fixed-t_j row). 17 significant digits, so the
    round-trip is exact for float64."""
    if np.iscomplexobj(field.values):
        raise TypeError("GRD files hold real fields only")
    g = field.grid
    lines = ["%d %d %s %s %s %s" % (g.nx, g.nt, _FMT % g.x0, _FMT % g.dx,
                                    _FMT % g.t0, _FMT % g.dt)]
    for j in range(g.nt):
        lines.append(" ".join(_FMT % v for v in field.values[:, j]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_field(path) -> RealField:
    with open(path) as fh:
        raw = fh.read().splitlines()

    def err(lineno, msg):
        raise GrdParseError("%s:%d: %s" % (os.fspath(path), lineno, msg))

    # '#' comment lines are allowed before the header only
    k = 0
    while k < len(raw) and (not raw[k].strip() or raw[k].lstrip().startswith("#")):
        k += 1
    if k >= len(raw):
        err(len(raw) or 1, "missing header")
    header = raw[k].split()
    if len(header) != 6:
        err(k + 1, "malformed header: expected 6 tokens 'nx nt x0 dx t0 dt', got %d"
            % len(header))
    try:
        nx, nt = int(header[0]), int(header[1])
        x0, dx, t0, dt = (float(tok) for tok in header[2:])
    except ValueError:
        err(k + 1, "malformed header: %r" % raw[k])
    try:
        grid = GridSpec(x0, dx, nx, t0, dt, nt)
    except ValueError as exc:
        err(k + 1, "invalid grid: %s" % exc)

    values = np.empty((nx, nt))
    j = 0
    for lineno in range(k + 1, len(raw)):
        line = raw[lineno].strip()
        if not line:
            continue
        if j >= nt:
            err(lineno + 1, "unexpected extra data row (grid has nt=%d)" % nt)
        toks = line.split()
        if len(toks) != nx:
            err(lineno + 1, "expected %d values, got %d" % (nx, len(toks)))
        try:
            row = np.array([float(tok) for tok in toks])
        except ValueError:
            err(lineno + 1, "unparseable value in row")
        if not np.all(np.isfinite(row)):
            err(lineno + 1, "non-finite value in row")
        values[:, j] = row
        j += 1
    if j != nt:
        err(len(raw), "expected %d data rows, got %d" % (nt, j))
    return RealField(grid, values)


def write_csv(field: RealField, path) -> None:
    """CSV surface dump: header "x,t,value", one row per node in row-major
    node order (x outer, t inner). Meant for external plotting tools."""
    if np.iscomplexobj(field.values):
        raise TypeError("CSV dumps hold real fields only")
    g = field.grid
    xs, ts = g.x_nodes(), g.t_nodes()
    with open(path, "w") as fh:
        fh.write("x,t,value\n")
        for i in range(g.nx):
            for j in range(g.nt):
                fh.write("%s,%s,%s\n" % (_FMT % xs[i], _FMT % ts[j],
                                         _FMT % field.values[i, j]))
