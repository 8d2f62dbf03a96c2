"""Spectral toolbox on the periodic square [-L, L)^2.

Conventions used throughout the package:

* points are identified with complex numbers z = x + i y; samples are stored
  row-major with ``values[iy, ix] ~ f(x[ix], y[iy])``,
* complex derivatives: d = (d/dx - i d/dy)/2 and dbar = (d/dx + i d/dy)/2,
  so on a plane wave exp(i(a x + b y)) the symbols are
  d -> (i a + b)/2 and dbar -> (i a - b)/2,
* the forward transform is the continuum-normalized Riemann sum
  F f(xi) = h^2 * sum_z f(z) exp(-i xi . z) on the dual lattice
  xi in (pi/L) Z^2, stored in FFT layout.  With the dual quadrature weight
  (1/2L)^2 this makes Parseval an identity of the discrete norms,
* the unimodular pairing exponential is e_k(z) = exp(i(zk + conj(zk))) and
  the normalized "hat" transform is u_hat(k) = (i/pi) * integral(e_{-k} u),
  i.e. (i/pi) times F u sampled at xi = (2 k1, -2 k2).
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy import fft as sfft
from scipy.special import j0

PHYSICAL = "physical"
SPECTRAL = "spectral"
SPECTRAL_PARAMETER = "spectral-parameter"

_TAG_CODES = {PHYSICAL: 0, SPECTRAL: 1, SPECTRAL_PARAMETER: 2}
_TAG_NAMES = {v: k for k, v in _TAG_CODES.items()}

F2D1_MAGIC = b"F2D1" + bytes([0, 1]) + b"\x00" * 10  # 16 bytes: tag + version


class UsageError(ValueError):
    """Caller violated an operation precondition (tags, grids, parameters)."""


class TagMismatchError(UsageError):
    pass


class GridMismatchError(UsageError):
    pass


class BandError(UsageError):
    """Requested spectral parameter lies outside the grid's resolvable band."""


class ContractViolation(RuntimeError):
    """An analytic contract failed numerically (e.g. nonzero mean where a
    zero-mean field is required).  Carries the offending magnitude."""

    def __init__(self, message: str, magnitude: float):
        super().__init__(f"{message} (magnitude {magnitude:.3e})")
        self.magnitude = float(magnitude)


class SupportLeakageWarning(UserWarning):
    """Field mass outside the window assumed by a free-space operation."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform n x n sampling of the square [-L, L) per axis.

    n must be a power of two (>= 8) so transforms and dyadic constructions
    stay exact; the dual lattice spacing is pi/L.
    """

    n: int
    L: float

    def __post_init__(self):
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise UsageError(f"grid size must be a power of two >= 8, got {self.n}")
        if not (self.L > 0):
            raise UsageError(f"grid half-width must be positive, got {self.L}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    @property
    def nyquist(self) -> float:
        """Largest resolved frequency magnitude per axis, pi/h."""
        return np.pi * self.n / (2.0 * self.L)

    @property
    def hat_band(self) -> float:
        """Half-width of the resolvable band of the hat transform.

        u_hat samples F u at (2 k1, -2 k2), so |k_j| <= nyquist/2.
        """
        return 0.5 * self.nyquist

    def axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.n)


@dataclass(frozen=True)
class Field:
    """Complex samples on a grid, tagged physical or spectral."""

    grid: GridSpec
    values: np.ndarray
    space_tag: str = PHYSICAL

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.shape != (self.grid.n, self.grid.n):
            raise UsageError(
                f"field shape {vals.shape} does not match grid n={self.grid.n}"
            )
        if self.space_tag not in _TAG_CODES:
            raise UsageError(f"unknown space tag {self.space_tag!r}")
        vals = np.ascontiguousarray(vals)
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class Multiplier:
    """Fourier symbol table on the dual grid (FFT layout).

    The value stored at the zero frequency *is* the dc policy; constructors
    record it separately for introspection.
    """

    grid: GridSpec
    symbol: np.ndarray
    dc_policy: complex = 0.0

    def __post_init__(self):
        sym = np.asarray(self.symbol, dtype=np.complex128)
        if sym.shape != (self.grid.n, self.grid.n):
            raise UsageError("symbol shape does not match grid")
        if not np.all(np.isfinite(sym)):
            raise UsageError("multiplier symbol must be finite everywhere")
        sym = np.ascontiguousarray(sym)
        sym.flags.writeable = False
        object.__setattr__(self, "symbol", sym)


@dataclass(frozen=True)
class Wavenumber:
    """Complex spectral parameter k = k1 + i k2."""

    k: complex

    def __post_init__(self):
        if not np.isfinite(self.k):
            raise UsageError("wavenumber components must be finite")

    @property
    def k1(self) -> float:
        return float(np.real(self.k))

    @property
    def k2(self) -> float:
        return float(np.imag(self.k))


def _as_k(k) -> complex:
    return complex(k.k) if isinstance(k, Wavenumber) else complex(k)


# ---------------------------------------------------------------------------
# cached per-grid tables


@lru_cache(maxsize=64)
def _xi_axes(n: int, L: float) -> Tuple[np.ndarray, np.ndarray]:
    """1-d dual axes (xi1 along ix, xi2 along iy), FFT layout."""
    xi = 2.0 * np.pi * np.fft.fftfreq(n, d=2.0 * L / n)
    return xi.copy(), xi.copy()


@lru_cache(maxsize=64)
def _xi_mesh(n: int, L: float) -> Tuple[np.ndarray, np.ndarray]:
    xi1, xi2 = _xi_axes(n, L)
    return np.meshgrid(xi1, xi2, indexing="xy")


@lru_cache(maxsize=64)
def _offset_phase(n: int, L: float) -> np.ndarray:
    """(-1)^(j1+j2) factor moving the sample origin from 0 to -L per axis."""
    j = np.rint(np.fft.fftfreq(n, d=1.0 / n)).astype(np.int64)
    sgn = np.where(j % 2 == 0, 1.0, -1.0)
    return np.outer(sgn, sgn)


@lru_cache(maxsize=64)
def _z_mesh(n: int, L: float) -> np.ndarray:
    ax = -L + (2.0 * L / n) * np.arange(n)
    X, Y = np.meshgrid(ax, ax, indexing="xy")
    return X + 1j * Y


def grid_points(grid: GridSpec) -> np.ndarray:
    """Complex coordinates z = x + i y, same layout as field values."""
    return _z_mesh(grid.n, grid.L)


def dual_axes(grid: GridSpec) -> Tuple[np.ndarray, np.ndarray]:
    return _xi_axes(grid.n, grid.L)


def dual_mesh(grid: GridSpec) -> Tuple[np.ndarray, np.ndarray]:
    return _xi_mesh(grid.n, grid.L)


# ---------------------------------------------------------------------------
# transforms


def _fft2(a: np.ndarray, workers: int = 1) -> np.ndarray:
    return sfft.fft2(a, workers=workers)


def _ifft2(a: np.ndarray, workers: int = 1) -> np.ndarray:
    return sfft.ifft2(a, workers=workers)


def _forward_values(vals: np.ndarray, grid: GridSpec, workers: int = 1) -> np.ndarray:
    phase = _offset_phase(grid.n, grid.L)
    return grid.cell_area * phase * _fft2(vals, workers=workers)


def _inverse_values(vals: np.ndarray, grid: GridSpec, workers: int = 1) -> np.ndarray:
    phase = _offset_phase(grid.n, grid.L)
    return _ifft2(phase * vals, workers=workers) / grid.cell_area


def forward_transform(f: Field, workers: int = 1) -> Field:
    if f.space_tag != PHYSICAL:
        raise TagMismatchError("forward_transform expects a physical field")
    return Field(f.grid, _forward_values(f.values, f.grid, workers), SPECTRAL)


def inverse_transform(f: Field, workers: int = 1) -> Field:
    if f.space_tag != SPECTRAL:
        raise TagMismatchError("inverse_transform expects a spectral field")
    return Field(f.grid, _inverse_values(f.values, f.grid, workers), PHYSICAL)


def grid_norm(f: Field | np.ndarray, grid: GridSpec | None = None) -> float:
    """Discrete L2 norm with the grid quadrature weight h^2."""
    if isinstance(f, Field):
        grid = f.grid
        vals = f.values
    else:
        if grid is None:
            raise UsageError("grid required for bare arrays")
        vals = f
    return float(np.sqrt(grid.cell_area * np.sum(np.abs(vals) ** 2)))


def grid_inner(f: Field, g: Field) -> complex:
    if f.grid != g.grid:
        raise GridMismatchError("inner product requires matching grids")
    return complex(f.grid.cell_area * np.vdot(f.values, g.values))


def spectral_norm(fhat: Field) -> float:
    """Dual-space L2 norm; equals grid_norm of the physical field (Parseval)."""
    if fhat.space_tag != SPECTRAL:
        raise TagMismatchError("spectral_norm expects a spectral field")
    w = 1.0 / (2.0 * fhat.grid.L)
    return float(w * np.sqrt(np.sum(np.abs(fhat.values) ** 2)))


def grid_integral(f: Field) -> complex:
    return complex(f.grid.cell_area * np.sum(f.values))


def grid_mean(f: Field) -> complex:
    return complex(np.mean(f.values))


# ---------------------------------------------------------------------------
# multipliers


def apply_multiplier(m: Multiplier, f: Field, workers: int = 1) -> Field:
    """inverse_transform(symbol * forward_transform(f)); tag is preserved."""
    if m.grid != f.grid:
        raise GridMismatchError("multiplier and field grids differ")
    if f.space_tag == SPECTRAL:
        return Field(f.grid, m.symbol * f.values, SPECTRAL)
    vals = _inverse_values(
        m.symbol * _forward_values(f.values, f.grid, workers), f.grid, workers
    )
    return Field(f.grid, vals, f.space_tag)


def identity_multiplier(grid: GridSpec) -> Multiplier:
    return Multiplier(grid, np.ones((grid.n, grid.n)), dc_policy=1.0)


@lru_cache(maxsize=64)
def _zeta_mesh(n: int, L: float) -> np.ndarray:
    X1, X2 = _xi_mesh(n, L)
    return X1 + 1j * X2


def d_multiplier(grid: GridSpec) -> Multiplier:
    zeta = _zeta_mesh(grid.n, grid.L)
    return Multiplier(grid, 0.5j * np.conj(zeta), dc_policy=0.0)


def dbar_multiplier(grid: GridSpec) -> Multiplier:
    zeta = _zeta_mesh(grid.n, grid.L)
    return Multiplier(grid, 0.5j * zeta, dc_policy=0.0)


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num, dtype=np.complex128)
    mask = den != 0
    out[mask] = num[mask] / den[mask]
    return out


def beurling_multiplier(grid: GridSpec) -> Multiplier:
    """dbar^{-1} d: unimodular off the zero frequency, 0 at it."""
    zeta = _zeta_mesh(grid.n, grid.L)
    return Multiplier(grid, _safe_ratio(np.conj(zeta), zeta), dc_policy=0.0)


def anti_beurling_multiplier(grid: GridSpec) -> Multiplier:
    """d^{-1} dbar: conjugate symbol of the Beurling multiplier."""
    zeta = _zeta_mesh(grid.n, grid.L)
    return Multiplier(grid, _safe_ratio(zeta, np.conj(zeta)), dc_policy=0.0)


def inv_dbar_multiplier(grid: GridSpec) -> Multiplier:
    """Periodic dbar^{-1} with zero dc; meaningful on zero-mean fields."""
    zeta = _zeta_mesh(grid.n, grid.L)
    return Multiplier(grid, _safe_ratio(2.0 * np.ones_like(zeta), 1j * zeta))


def inv_d_multiplier(grid: GridSpec) -> Multiplier:
    zeta = _zeta_mesh(grid.n, grid.L)
    return Multiplier(grid, _safe_ratio(2.0 * np.ones_like(zeta), 1j * np.conj(zeta)))


def laplacian_multiplier(grid: GridSpec) -> Multiplier:
    X1, X2 = _xi_mesh(grid.n, grid.L)
    return Multiplier(grid, -(X1**2 + X2**2) + 0j)


def fractional_multiplier(grid: GridSpec, s: float) -> Multiplier:
    """|D|^s with zero dc (homogeneous symbol |xi|^s)."""
    X1, X2 = _xi_mesh(grid.n, grid.L)
    rho = np.sqrt(X1**2 + X2**2)
    sym = np.zeros_like(rho, dtype=np.complex128)
    mask = rho > 0
    sym[mask] = rho[mask] ** s
    return Multiplier(grid, sym)


def dealias_mask(grid: GridSpec, fraction: float) -> np.ndarray:
    """Radial low-pass mask |xi| <= fraction * nyquist (boolean, FFT layout)."""
    X1, X2 = _xi_mesh(grid.n, grid.L)
    return (X1**2 + X2**2) <= (fraction * grid.nyquist) ** 2


def d(f: Field, workers: int = 1) -> Field:
    return apply_multiplier(d_multiplier(f.grid), f, workers)


def d_bar(f: Field, workers: int = 1) -> Field:
    return apply_multiplier(dbar_multiplier(f.grid), f, workers)


_MEAN_TOL = 1e-10


def _require_zero_mean(f: Field, what: str, strict: bool) -> None:
    scale = max(float(np.max(np.abs(f.values))), 1e-300)
    rel_mean = abs(grid_mean(f)) / scale
    if strict and rel_mean > _MEAN_TOL:
        raise ContractViolation(f"{what} requires a zero-mean field", rel_mean)


def beurling(f: Field, strict: bool = True, workers: int = 1) -> Field:
    _require_zero_mean(f, "beurling", strict)
    return apply_multiplier(beurling_multiplier(f.grid), f, workers)


def anti_beurling(f: Field, strict: bool = True, workers: int = 1) -> Field:
    _require_zero_mean(f, "anti_beurling", strict)
    return apply_multiplier(anti_beurling_multiplier(f.grid), f, workers)


# ---------------------------------------------------------------------------
# Cauchy transforms (dbar^{-1})


@lru_cache(maxsize=32)
def _free_cauchy_symbol(n_pad: int, L_pad: float, radius: float) -> np.ndarray:
    """Exact Fourier transform of the truncated kernel 1/(pi z) 1_{|z|<=radius}.

    K_R^(xi) = (-2i / zeta) (1 - J0(radius |xi|)); the Bessel factor removes
    the 1/zeta singularity, so the symbol is smooth and vanishes at xi = 0.
    Sampling it on the dual lattice of the padded box realizes circular
    convolution with the truncated kernel (the radius-R ball fits in the
    padded torus, so periodization does not overlap).
    """
    X1, X2 = _xi_mesh(n_pad, L_pad)
    zeta = X1 + 1j * X2
    rho2 = X1**2 + X2**2
    sym = np.zeros_like(zeta)
    mask = rho2 > 0
    sym[mask] = (-2j * np.conj(zeta[mask]) / rho2[mask]) * (
        1.0 - j0(radius * np.sqrt(rho2[mask]))
    )
    sym.flags.writeable = False
    return sym


def _free_cauchy_padded(
    vals: np.ndarray, grid: GridSpec, pad_factor: int = 2, workers: int = 1
) -> np.ndarray:
    """Free-space dbar^{-1} by truncated-kernel convolution on a padded torus.

    Returns the solution on the full padded (pad_factor*n)^2 grid.
    """
    n, L = grid.n, grid.L
    npad = pad_factor * n
    Lpad = pad_factor * L
    big = np.zeros((npad, npad), dtype=np.complex128)
    lo = (npad - n) // 2
    big[lo : lo + n, lo : lo + n] = vals
    pad_grid = GridSpec(npad, Lpad)
    sym = _free_cauchy_symbol(npad, Lpad, 2.0 * L)
    return _inverse_values(
        sym * _forward_values(big, pad_grid, workers), pad_grid, workers
    )


def _free_cauchy_values(
    vals: np.ndarray, grid: GridSpec, pad_factor: int = 2, workers: int = 1
) -> np.ndarray:
    n = grid.n
    lo = (pad_factor * n - n) // 2
    out = _free_cauchy_padded(vals, grid, pad_factor, workers)
    return np.ascontiguousarray(out[lo : lo + n, lo : lo + n])


def central_tail_fraction(f: Field) -> float:
    """L2 mass fraction outside the central half-window [-L/2, L/2)^2."""
    n = f.grid.n
    lo, hi = n // 4, n - n // 4
    inner = np.zeros_like(f.values)
    inner[lo:hi, lo:hi] = f.values[lo:hi, lo:hi]
    total = np.sqrt(np.sum(np.abs(f.values) ** 2))
    if total == 0:
        return 0.0
    outer = np.sqrt(max(np.sum(np.abs(f.values) ** 2) - np.sum(np.abs(inner) ** 2), 0.0))
    return float(outer / total)


PERIODIC_DC_ZERO = "periodic_dc_zero"
FREE_SPACE_TRUNCATED = "free_space_truncated"


def cauchy_transform(
    f: Field,
    mode: str = FREE_SPACE_TRUNCATED,
    tail_threshold: float = 1e-6,
    return_padded: bool = False,
    workers: int = 1,
) -> Field:
    """dbar^{-1} f.

    periodic_dc_zero: Fourier division with zero dc; requires zero-mean f.
    free_space_truncated: convolution with 1/(pi z) truncated at radius 2L on
    a zero-padded (2n)^2 grid, so periodic images stay out of the window;
    appropriate for fields supported in the central half of the box.

    With return_padded the free-space result is returned on the full
    (2n, 2L) grid, where it is genuinely periodic; differentiate there
    (the 1/z tail makes the cropped window non-periodic).
    """
    if f.space_tag != PHYSICAL:
        raise TagMismatchError("cauchy_transform expects a physical field")
    if mode == PERIODIC_DC_ZERO:
        _require_zero_mean(f, "periodic cauchy_transform", strict=True)
        return apply_multiplier(inv_dbar_multiplier(f.grid), f, workers)
    if mode == FREE_SPACE_TRUNCATED:
        tail = central_tail_fraction(f)
        if tail > tail_threshold:
            warnings.warn(
                SupportLeakageWarning(
                    f"free-space cauchy_transform input has relative tail mass "
                    f"{tail:.3e} outside the central half-window "
                    f"(threshold {tail_threshold:.1e})"
                )
            )
        if return_padded:
            big = _free_cauchy_padded(f.values, f.grid, 2, workers)
            return Field(GridSpec(2 * f.grid.n, 2 * f.grid.L), big, PHYSICAL)
        return Field(f.grid, _free_cauchy_values(f.values, f.grid, 2, workers), PHYSICAL)
    raise UsageError(f"unknown cauchy_transform mode {mode!r}")


# ---------------------------------------------------------------------------
# pairing exponentials and the normalized hat transform


def exp_k(grid: GridSpec, k) -> Field:
    """e_k(z) = exp(i(zk + conj(zk))) = exp(2i(x k1 - y k2)); unimodular."""
    kc = _as_k(k)
    z = grid_points(grid)
    phase = z * kc
    return Field(grid, np.exp(1j * (phase + np.conj(phase))), PHYSICAL)


def _exp_axes(grid: GridSpec, k1: np.ndarray, k2: np.ndarray):
    """Separable factors of e_{-k}(z) on the tensor grid (k rows, z columns)."""
    ax = grid.axis()
    ex = np.exp(-2j * np.outer(k1, ax))  # e^{-2i x k1}
    ey = np.exp(2j * np.outer(k2, ax))  # e^{+2i y k2}
    return ex, ey


def hat_transform(u: Field, k) -> complex:
    """u_hat(k) = (i/pi) * h^2 sum e_{-k}(z) u(z)."""
    kc = _as_k(k)
    band = u.grid.hat_band
    if max(abs(kc.real), abs(kc.imag)) > band + 1e-12:
        raise BandError(
            f"|k| component {kc} exceeds the hat band {band:.3f} of the grid"
        )
    em = exp_k(u.grid, -kc)
    return complex((1j / np.pi) * u.grid.cell_area * np.sum(em.values * u.values))


def hat_transform_nodes(u: Field, k1: np.ndarray, k2: np.ndarray) -> np.ndarray:
    """Hat transform on the tensor product k1 x k2 (returns [ik2, ik1])."""
    k1 = np.asarray(k1, dtype=float)
    k2 = np.asarray(k2, dtype=float)
    band = u.grid.hat_band
    if k1.size and k2.size:
        if max(np.max(np.abs(k1)), np.max(np.abs(k2))) > band + 1e-12:
            raise BandError("k nodes exceed the hat band of the grid")
    ex, ey = _exp_axes(u.grid, k1, k2)
    # sum_y e^{2iyk2} sum_x e^{-2ixk1} u[y, x]
    inner = u.values @ ex.T  # [iy, ik1]
    out = ey @ inner  # [ik2, ik1]
    return (1j / np.pi) * u.grid.cell_area * out


def check_transform_nodes(
    s_values: np.ndarray,
    k1: np.ndarray,
    k2: np.ndarray,
    cell_area: float,
    out_grid: GridSpec,
) -> Field:
    """Inverse normalization: s_check(z) = (-i/pi) * integral e_k(z) s(k) dk.

    Quadrature over the supplied k nodes (tensor grid, s[ik2, ik1]).
    """
    ax = out_grid.axis()
    ex = np.exp(2j * np.outer(np.asarray(k1, float), ax))  # e^{+2i x k1}
    ey = np.exp(-2j * np.outer(np.asarray(k2, float), ax))  # e^{-2i y k2}
    inner = s_values @ ex  # [ik2, ix]
    vals = (-1j / np.pi) * cell_area * (ey.T @ inner)  # [iy, ix]
    return Field(out_grid, vals, PHYSICAL)


def resample_field(f: Field, n_out: int) -> Field:
    """Band-limited resample onto a grid with the same half-width.

    Assumes negligible content at and beyond the smaller Nyquist band.
    """
    if f.space_tag != PHYSICAL:
        raise TagMismatchError("resample_field expects a physical field")
    n_in = f.grid.n
    if n_out == n_in:
        return f
    out_grid = GridSpec(n_out, f.grid.L)
    fin = np.fft.fftshift(_forward_values(f.values, f.grid))
    m = min(n_in, n_out)
    lo_in = (n_in - m) // 2
    lo_out = (n_out - m) // 2
    fout = np.zeros((n_out, n_out), dtype=np.complex128)
    fout[lo_out : lo_out + m, lo_out : lo_out + m] = fin[
        lo_in : lo_in + m, lo_in : lo_in + m
    ]
    vals = _inverse_values(np.fft.ifftshift(fout), out_grid)
    return Field(out_grid, vals, PHYSICAL)


# ---------------------------------------------------------------------------
# F2D1 container


def write_field(path, f: Field) -> None:
    """F2D1: 16-byte magic+version, n (u32 LE), L (f64 LE), tag byte, samples.

    Samples are n^2 complex values as interleaved (re, im) float64 LE,
    row-major.
    """
    with open(path, "wb") as fh:
        fh.write(F2D1_MAGIC)
        fh.write(struct.pack("<I", f.grid.n))
        fh.write(struct.pack("<d", f.grid.L))
        fh.write(struct.pack("<B", _TAG_CODES[f.space_tag]))
        fh.write(np.ascontiguousarray(f.values, dtype="<c16").tobytes())


def read_field(path) -> Field:
    with open(path, "rb") as fh:
        magic = fh.read(16)
        if magic != F2D1_MAGIC:
            raise UsageError(f"not an F2D1 file: bad magic {magic!r}")
        (n,) = struct.unpack("<I", fh.read(4))
        (L,) = struct.unpack("<d", fh.read(8))
        (tag,) = struct.unpack("<B", fh.read(1))
        if tag not in _TAG_NAMES:
            raise UsageError(f"unknown space tag code {tag}")
        raw = fh.read(16 * n * n)
        vals = np.frombuffer(raw, dtype="<c16").reshape(n, n)
    return Field(GridSpec(int(n), float(L)), vals, _TAG_NAMES[tag])
