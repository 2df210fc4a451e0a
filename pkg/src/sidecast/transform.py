"""Continuous 2D Fourier transform and inverse by rectangle-rule quadrature
under the symmetric 1/(2 pi) convention, plus causal 2D convolution with the
closed-form kernel family.

The transform pair is fixed here once: forward kernel (1/2pi) e^{-i(xz+tr)},
inverse kernel (1/2pi) e^{+i(xz+tr)}. No other module may rescale. Under
this convention the transform of a convolution is 2*pi times the product of
transforms; the regularizer owns that constant.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import oaconvolve

from .fields import ComplexField, GridSpec, RealField
from .kernels import KernelSpec, kernel_eval

__all__ = [
    "WindowShape",
    "SpectralWindow",
    "dft2_forward",
    "idft2_windowed",
    "idft2_windowed_at",
    "convolve2_causal",
]

TWO_PI = 2.0 * math.pi


class WindowShape(enum.Enum):
    RECT_LR = "rect_lr"  # |z| <= zmax, |r| <= rmax (low-frequency rectangle)
    SQUARE = "square"    # |z|, |r| <= a


@dataclass(frozen=True)
class SpectralWindow:
    shape: WindowShape
    zmax: float
    rmax: float

    def __post_init__(self):
        if not (self.zmax > 0 and self.rmax > 0):
            raise ValueError("window extents must be positive")
        if self.shape is WindowShape.SQUARE and self.zmax != self.rmax:
            raise ValueError("SQUARE window needs zmax == rmax")

    @classmethod
    def rect(cls, zmax: float, rmax: float) -> "SpectralWindow":
        return cls(WindowShape.RECT_LR, zmax, rmax)

    @classmethod
    def square(cls, a: float) -> "SpectralWindow":
        return cls(WindowShape.SQUARE, a, a)

    def contains(self, z, r):
        """Inclusive node mask; boundary nodes carry full quadrature weight."""
        tol_z = 1e-12 * max(1.0, self.zmax)
        tol_r = 1e-12 * max(1.0, self.rmax)
        return (np.abs(z) <= self.zmax + tol_z) & (np.abs(r) <= self.rmax + tol_r)


def dft2_forward(field: RealField, spectral_grid: GridSpec) -> ComplexField:
    """Rectangle-rule transform onto the spectral grid.

    out[k, l] = (1/2pi) * sum_{i,j} field[i,j] e^{-i(x_i z_k + t_j r_l)} dx dt,
    evaluated as two matrix products (identical sum, reassociated).
    """
    g = field.grid
    zs = spectral_grid.x_nodes()
    rs = spectral_grid.t_nodes()
    ez = np.exp(-1j * np.outer(zs, g.x_nodes()))   # (nz, nx)
    et = np.exp(-1j * np.outer(g.t_nodes(), rs))   # (nt, nr)
    vals = (ez @ field.values @ et) * (g.cell_area / TWO_PI)
    return ComplexField(spectral_grid, vals)


def _dft2_direct(field: RealField, spectral_grid: GridSpec) -> ComplexField:
    """Literal quadruple-loop definition; reference for equality tests."""
    g = field.grid
    xs, ts = g.x_nodes(), g.t_nodes()
    zs, rs = spectral_grid.x_nodes(), spectral_grid.t_nodes()
    out = np.zeros((spectral_grid.nx, spectral_grid.nt), dtype=complex)
    for k, z in enumerate(zs):
        for l, r in enumerate(rs):
            acc = 0.0 + 0.0j
            for i, x in enumerate(xs):
                for j, t in enumerate(ts):
                    acc += field.values[i, j] * np.exp(-1j * (x * z + t * r))
            out[k, l] = acc * g.cell_area / TWO_PI
    return ComplexField(spectral_grid, out)


def _windowed_nodes(spec: ComplexField, window: SpectralWindow):
    g = spec.grid
    zs, rs = g.x_nodes(), g.t_nodes()
    tol = 1e-9 * max(g.dx, g.dt, 1.0)
    if -window.zmax < zs[0] - tol or window.zmax > zs[-1] + tol \
            or -window.rmax < rs[0] - tol or window.rmax > rs[-1] + tol:
        raise ValueError("window %r exceeds spectral grid coverage "
                         "[%g, %g] x [%g, %g]"
                         % (window, zs[0], zs[-1], rs[0], rs[-1]))
    Z, R = np.meshgrid(zs, rs, indexing="ij")
    return zs, rs, window.contains(Z, R)


def _check_imag_residue(vals: np.ndarray):
    mr = float(np.max(np.abs(vals.real))) if vals.size else 0.0
    mi = float(np.max(np.abs(vals.imag))) if vals.size else 0.0
    if mi > 1e-6 * mr:
        raise ValueError(
            "imaginary residue %.3e exceeds 1e-6 of max real %.3e; "
            "input spectrum is not conjugate-symmetric" % (mi, mr))


def idft2_windowed(spec: ComplexField, window: SpectralWindow,
                   phys_grid: GridSpec) -> RealField:
    """Inverse transform restricted to spectral nodes inside the window.

    For conjugate-symmetric input the result is real up to rounding; an
    imaginary residue above 1e-6 of the real part is an error (it means a
    symmetry bug upstream), below that it is discarded.
    """
    zs, rs, mask = _windowed_nodes(spec, window)
    g = spec.grid
    masked = np.where(mask, spec.values, 0.0)
    ex = np.exp(1j * np.outer(phys_grid.x_nodes(), zs))   # (nx, nz)
    et = np.exp(1j * np.outer(rs, phys_grid.t_nodes()))   # (nr, nt)
    vals = (ex @ masked @ et) * (g.cell_area / TWO_PI)
    _check_imag_residue(vals)
    return RealField(phys_grid, vals.real)


def idft2_windowed_at(spec: ComplexField, window: SpectralWindow, x, t):
    """Same windowed inverse, evaluated at arbitrary (x, t) points.

    x and t are broadcast together; returns float or an array of their
    broadcast shape. This is the direct evaluator that the Sinc expansion
    is measured against.
    """
    zs, rs, mask = _windowed_nodes(spec, window)
    g = spec.grid
    masked = np.where(mask, spec.values, 0.0)
    xb, tb = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
    shape = xb.shape
    xf, tf = xb.ravel(), tb.ravel()
    ex = np.exp(1j * np.outer(xf, zs))            # (npts, nz)
    et = np.exp(1j * np.outer(rs, tf))            # (nr, npts)
    # optimize=True contracts via matmuls; intermediate is npts x nr only
    vals = np.einsum("pz,zr,rp->p", ex, masked, et,
                     optimize=True) * (g.cell_area / TWO_PI)
    _check_imag_residue(vals)
    out = vals.real.reshape(shape)
    if np.ndim(x) == 0 and np.ndim(t) == 0:
        return float(out)
    return out


def _lattice_offsets(out_grid: GridSpec, in_grid: GridSpec):
    """Integer node offsets of out_grid on in_grid's lattice, or an error:
    convolution output nodes must live on the input sampling lattice."""
    if not math.isclose(out_grid.dx, in_grid.dx, rel_tol=1e-12) \
            or not math.isclose(out_grid.dt, in_grid.dt, rel_tol=1e-12):
        raise ValueError("output grid steps must match the input lattice")
    ox = (out_grid.x0 - in_grid.x0) / in_grid.dx
    ot = (out_grid.t0 - in_grid.t0) / in_grid.dt
    if abs(ox - round(ox)) > 1e-6 or abs(ot - round(ot)) > 1e-6:
        raise ValueError("output grid nodes do not lie on the input lattice")
    return int(round(ox)), int(round(ot))


def convolve2_causal(spec: KernelSpec, w: RealField,
                     out_grid: GridSpec) -> RealField:
    """(k_c * w)(x, t) = integral k_c(x-xi, t-tau) w(xi, tau) dxi dtau by the
    rectangle rule on w's lattice.

    The kernel vanishes for time lags <= 0, so only forward lags are
    formed; space lags are truncated where the Gaussian factor drops below
    1e-12 of its peak. Everything left of w's grid is treated as zero (w is
    assumed to vanish for t <= 0), so w's grid should start near t = 0.
    out_grid must be lattice-aligned with w's grid and start no earlier.
    """
    gin = w.grid
    if out_grid.t0 < gin.t0 - 1e-12 * gin.dt:
        raise ValueError("output grid extends before the data grid's t0")
    ox, ot = _lattice_offsets(out_grid, gin)
    dx, dt = gin.dx, gin.dt

    # forward time lags; lag 0 evaluates to 0 but keeps index bookkeeping flat
    n_lag_t = ot + out_grid.nt
    lag_t = dt * np.arange(n_lag_t)
    t_lag_max = lag_t[-1] if n_lag_t > 1 else dt

    # space lag range: enough to map any input column onto any output column,
    # clipped by the Gaussian cutoff  exp(-lag^2/(4 t)) >= 1e-12
    lag_cut = math.sqrt(4.0 * t_lag_max * math.log(1e12))
    lo = max(ox - (gin.nx - 1), -int(math.ceil(lag_cut / dx)))
    hi = min(ox + out_grid.nx - 1, int(math.ceil(lag_cut / dx)))
    if lo > hi:
        # every needed lag is beyond the cutoff; the convolution vanishes
        return RealField(out_grid, np.zeros(out_grid.shape))
    lag_x = dx * np.arange(lo, hi + 1)

    LX, LT = np.meshgrid(lag_x, lag_t, indexing="ij")
    kv = kernel_eval(spec, LX, LT)
    full = oaconvolve(kv, w.values, mode="full") * (dx * dt)
    # full[p, q] corresponds to lag_x[0]+x_in[0] + p*dx, lag_t[0]+t_in[0] + q*dt
    ps = (ox - lo) + np.arange(out_grid.nx)
    qs = ot + np.arange(out_grid.nt)
    vals = np.zeros(out_grid.shape)
    ok = (ps >= 0) & (ps < full.shape[0])  # lags clipped above fall here
    vals[ok, :] = full[np.ix_(ps[ok], qs)]
    return RealField(out_grid, vals)


def _convolve2_direct(spec: KernelSpec, w: RealField,
                      out_grid: GridSpec) -> RealField:
    """Direct-sum reference (no FFT, no lag truncation) for equality tests."""
    gin = w.grid
    if out_grid.t0 < gin.t0 - 1e-12 * gin.dt:
        raise ValueError("output grid extends before the data grid's t0")
    _lattice_offsets(out_grid, gin)
    xs_i, ts_i = gin.x_nodes(), gin.t_nodes()
    out = np.zeros(out_grid.shape)
    for a, x in enumerate(out_grid.x_nodes()):
        for b, t in enumerate(out_grid.t_nodes()):
            kv = kernel_eval(spec, x - xs_i[:, None], t - ts_i[None, :])
            out[a, b] = np.sum(kv * w.values) * gin.cell_area
    return RealField(out_grid, out)
