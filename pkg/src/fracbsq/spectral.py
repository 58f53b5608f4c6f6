"""Fourier lattice, spectral field containers and pseudo-spectral operators.

Conventions
-----------
The physical domain is the 2*pi-periodic torus sampled on ``n**3`` points.
Coefficients are stored as the *unnormalized* forward DFT (kernel
``exp(-i k.x)``); the inverse carries ``1/n**3``.  Every lattice sum over
Fourier modes uses the normalized coefficients

    c_k = (2*pi)**1.5 / n**3 * F_k

so that ``sum |c_k|**2`` equals the physical L2 norm squared
``sum_x |f(x)|**2 * (2*pi/n)**3`` exactly (Plancherel).  The squared factor
``(2*pi)**3 / n**6`` is exposed as :attr:`FourierGrid.normalization`.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft

from ._parallel import worker_count

BOX_PERIOD = 2.0 * np.pi
MIN_N = 8
MAX_N = 256


@dataclass(frozen=True, eq=False)
class FourierGrid:
    """Truncated integer lattice ``k in [-n/2, n/2)**3`` with a 2/3-rule mask."""

    n: int
    k: np.ndarray  # (3, n, n, n) integer wavevectors
    kmag: np.ndarray  # (n, n, n) Euclidean |k|
    dealias_mask: np.ndarray  # (n, n, n) bool, True = retained
    cutoff: int

    box_period = BOX_PERIOD

    @property
    def n_per_axis(self):
        return self.n

    @property
    def shape(self):
        return (self.n, self.n, self.n)

    @property
    def n_modes(self):
        return self.n**3

    @property
    def k2(self):
        return self.kmag**2

    @property
    def normalization(self):
        """Weight of ``|F_k|**2`` in every quadratic lattice sum."""
        return BOX_PERIOD**3 / float(self.n) ** 6

    @property
    def amplitude_scale(self):
        """``sqrt(normalization)``: maps raw DFT coefficients to ``c_k``."""
        return BOX_PERIOD**1.5 / float(self.n) ** 3

    @property
    def retained_count(self):
        return int(self.dealias_mask.sum())

    def kmag_retained_max(self):
        return float(self.kmag[self.dealias_mask].max())


def _axis_wavenumbers(n):
    return np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)


@lru_cache(maxsize=None)
def _build_grid(n):
    k1 = _axis_wavenumbers(n)
    kx, ky, kz = np.meshgrid(k1, k1, k1, indexing="ij")
    k = np.stack([kx, ky, kz])
    kmag = np.sqrt((k.astype(np.float64) ** 2).sum(axis=0))
    # Largest K with 3K < n: products of retained modes never alias back
    # into the retained set (K = floor(n/3) is not enough when 3 | n).
    cutoff = (n - 1) // 3
    mask = np.all(np.abs(k) <= cutoff, axis=0)
    for arr in (k, kmag, mask):
        arr.setflags(write=False)
    return FourierGrid(n=n, k=k, kmag=kmag, dealias_mask=mask, cutoff=cutoff)


def make_grid(n_per_axis):
    """Return the (cached) lattice with ``n_per_axis`` modes per axis."""
    if isinstance(n_per_axis, bool) or not isinstance(n_per_axis, (int, np.integer)):
        raise TypeError(f"n_per_axis must be an integer, got {n_per_axis!r}")
    n = int(n_per_axis)
    if n % 2 or n < MIN_N or n > MAX_N:
        raise ValueError(f"n_per_axis must be even and in [{MIN_N}, {MAX_N}], got {n}")
    return _build_grid(n)


def forward(phys):
    """Unnormalized forward DFT over the last three axes."""
    return scipy.fft.fftn(phys, axes=(-3, -2, -1), workers=worker_count())


def inverse(coeffs):
    """Inverse DFT (carries ``1/n**3``); returns the real part."""
    return scipy.fft.ifftn(coeffs, axes=(-3, -2, -1), workers=worker_count()).real


def reflect(arr):
    """Array of values at ``-k``: ``out[..., i, j, l] = arr[..., -i, -j, -l]``."""
    flipped = np.flip(arr, axis=(-3, -2, -1))
    return np.roll(flipped, 1, axis=(-3, -2, -1))


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Raw DFT coefficients of a real scalar (1 component) or vector (3) field."""

    grid: FourierGrid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.ndim == 3:
            c = c[None]
        if c.ndim != 4 or c.shape[1:] != self.grid.shape or c.shape[0] not in (1, 3):
            raise ValueError(
                f"coeffs must have shape (1|3, {self.grid.n}, {self.grid.n}, {self.grid.n}), "
                f"got {np.shape(self.coeffs)}"
            )
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, grid, components=1):
        return cls(grid, np.zeros((components,) + grid.shape, dtype=np.complex128))

    @classmethod
    def from_physical(cls, grid, values):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 3:
            values = values[None]
        return cls(grid, forward(values))

    @property
    def components(self):
        return self.coeffs.shape[0]

    @property
    def is_vector(self):
        return self.components == 3

    def to_physical(self):
        return inverse(self.coeffs)

    def normalized(self):
        """Coefficients ``c_k`` used by every norm."""
        return self.coeffs * self.grid.amplitude_scale

    def component(self, i):
        return SpectralField(self.grid, self.coeffs[i : i + 1])

    def with_coeffs(self, coeffs):
        return SpectralField(self.grid, coeffs)

    def _check(self, other):
        if not isinstance(other, SpectralField):
            return NotImplemented
        if other.grid.n != self.grid.n:
            raise GridMismatchError(f"grid n={self.grid.n} vs n={other.grid.n}")
        if other.components != self.components:
            raise ValueError(f"component count {self.components} vs {other.components}")
        return None

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def conjugate_symmetry_error(self):
        """Max ``|c(-k) - conj(c(k))|`` relative to the max coefficient."""
        scale = np.abs(self.coeffs).max()
        if scale == 0:
            return 0.0
        return float(np.abs(reflect(self.coeffs) - np.conj(self.coeffs)).max() / scale)

    def is_finite(self):
        return bool(np.isfinite(self.coeffs).all())


@dataclass(frozen=True, eq=False)
class CoupledState:
    """Velocity ``u_hat`` (3 components) and temperature ``theta_hat`` at ``time``."""

    u_hat: SpectralField
    theta_hat: SpectralField
    time: float = 0.0

    def __post_init__(self):
        if self.u_hat.components != 3:
            raise ValueError("u_hat must have 3 components")
        if self.theta_hat.components != 1:
            raise ValueError("theta_hat must have 1 component")
        if self.u_hat.grid.n != self.theta_hat.grid.n:
            raise GridMismatchError("velocity and temperature live on different grids")
        object.__setattr__(self, "time", float(self.time))

    @property
    def grid(self):
        return self.u_hat.grid

    @classmethod
    def zeros(cls, grid, time=0.0):
        return cls(SpectralField.zeros(grid, 3), SpectralField.zeros(grid, 1), time)

    @classmethod
    def from_array(cls, grid, arr, time=0.0):
        """Build from a stacked ``(4, n, n, n)`` array ``(u1, u2, u3, theta)``."""
        return cls(SpectralField(grid, arr[:3]), SpectralField(grid, arr[3:4]), time)

    def as_array(self):
        return np.concatenate([self.u_hat.coeffs, self.theta_hat.coeffs])

    def scaled(self, c):
        return CoupledState(self.u_hat * c, self.theta_hat * c, self.time)

    def at_time(self, time):
        return CoupledState(self.u_hat, self.theta_hat, time)

    def divergence_error(self):
        """Max over modes of ``|k . u(k)| / (|k| |u(k)|)``; 0 for a zero field."""
        k = self.grid.k
        u = self.u_hat.coeffs
        div = np.abs((k * u).sum(axis=0))
        amp = np.sqrt((np.abs(u) ** 2).sum(axis=0)) * self.grid.kmag
        nz = amp > 0
        if not nz.any():
            return 0.0
        return float((div[nz] / amp[nz]).max())

    def is_finite(self):
        return self.u_hat.is_finite() and self.theta_hat.is_finite()


def leray_project(f):
    """Helmholtz projection ``f - (f.k) k / |k|**2`` onto divergence-free fields."""
    if not isinstance(f, SpectralField) or f.components != 3:
        raise ValueError("leray_project needs a 3-component SpectralField")
    grid = f.grid
    k = grid.k.astype(np.float64)
    k2 = grid.k2.copy()
    k2[0, 0, 0] = 1.0
    kdotf = (k * f.coeffs).sum(axis=0)
    out = f.coeffs - k * (kdotf / k2)
    out[:, 0, 0, 0] = 0.0
    return SpectralField(grid, out)


def nonlinear_advection(u, w):
    """Dealiased ``F[u . grad w] = i sum_j k_j F[u_j w]`` for divergence-free ``u``.

    ``w`` may be scalar or vector; the result has ``w``'s component count.
    """
    if u.components != 3:
        raise ValueError("advecting velocity must have 3 components")
    if u.grid.n != w.grid.n:
        raise GridMismatchError(f"grid n={u.grid.n} vs n={w.grid.n}")
    grid = u.grid
    mask = grid.dealias_mask
    uu = inverse(u.coeffs * mask)
    ww = inverse(w.coeffs * mask)
    flux = forward(uu[:, None] * ww[None])  # (3, c, n, n, n)
    k = grid.k.astype(np.float64)
    out = 1j * np.einsum("j...,jc...->c...", k, flux)
    out *= mask
    out[:, 0, 0, 0] = 0.0
    return SpectralField(grid, out)


def symmetrize(coeffs):
    """Project raw coefficients onto the real-field subspace and zero ``k = 0``."""
    out = 0.5 * (coeffs + np.conj(reflect(coeffs)))
    out[..., 0, 0, 0] = 0.0
    return out


def random_coefficients(rng, grid, components, spectrum_decay, amplitude, kmax=None):
    """Gaussian raw coefficients with ``|c_k| ~ amplitude * |k|**-decay`` on retained modes."""
    shape = (components,) + grid.shape
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    kmag = grid.kmag.copy()
    kmag[0, 0, 0] = 1.0
    envelope = amplitude * kmag ** (-float(spectrum_decay)) / grid.amplitude_scale
    support = grid.dealias_mask.copy()
    if kmax is not None:
        support &= grid.kmag <= kmax
    coeffs = z * envelope * support
    # Nyquist planes are outside the mask, so symmetrizing keeps the support.
    return symmetrize(coeffs)


def random_divfree_state(seed, grid, spectrum_decay=2.0, amplitude=1.0, time=0.0):
    """Deterministic random mean-free, divergence-free, dealiased state."""
    if amplitude < 0:
        raise ValueError("amplitude must be nonnegative")
    rng = np.random.default_rng(seed)
    u = random_coefficients(rng, grid, 3, spectrum_decay, amplitude)
    theta = random_coefficients(rng, grid, 1, spectrum_decay, amplitude)
    u_field = leray_project(SpectralField(grid, u))
    return CoupledState(u_field, SpectralField(grid, theta), time)


def single_mode_field(grid, k, amplitude):
    """Field with raw coefficient ``amplitude`` at ``k`` and its conjugate at ``-k``.

    ``amplitude`` is a scalar (1 component) or a length-3 vector (3 components).
    """
    amp = np.atleast_1d(np.asarray(amplitude, dtype=np.complex128))
    if amp.shape not in ((1,), (3,)):
        raise ValueError("amplitude must be a scalar or a 3-vector")
    k = tuple(int(v) for v in k)
    if k == (0, 0, 0):
        raise ValueError("zero mode is excluded (mean-free fields)")
    if max(abs(v) for v in k) >= grid.n // 2:
        raise ValueError(f"mode {k} is not representable on n={grid.n}")
    coeffs = np.zeros((amp.size,) + grid.shape, dtype=np.complex128)
    idx = tuple(v % grid.n for v in k)
    nidx = tuple((-v) % grid.n for v in k)
    coeffs[(slice(None),) + idx] += amp
    coeffs[(slice(None),) + nidx] += np.conj(amp)
    return SpectralField(grid, coeffs)


def pad_to(f, grid):
    """Re-express ``f`` on a finer lattice (same physical function).

    Only modes with ``|k_i| < min(n, m)/2`` are carried over; fields built on
    the retained set always satisfy this.
    """
    n, m = f.grid.n, grid.n
    if m < n:
        raise ValueError("pad_to only refines")
    out = np.zeros((f.components,) + grid.shape, dtype=np.complex128)
    k1 = _axis_wavenumbers(n)
    keep = np.abs(k1) < n // 2
    src = np.nonzero(keep)[0]
    dst = k1[keep] % m
    out[np.ix_(range(f.components), dst, dst, dst)] = f.coeffs[np.ix_(range(f.components), src, src, src)]
    out *= (m / n) ** 3
    return SpectralField(grid, out)


def exact_product(f, g):
    """Alias-free pointwise product of two scalar fields on retained modes.

    The result lives on a padded lattice large enough to hold every
    product mode (``|k_i| <= 2 * cutoff``) without wrap-around.
    """
    if f.grid.n != g.grid.n:
        raise GridMismatchError(f"grid n={f.grid.n} vs n={g.grid.n}")
    if f.components != 1 or g.components != 1:
        raise ValueError("exact_product expects scalar fields")
    kc = f.grid.cutoff
    m = max(MIN_N, 4 * kc + 2)
    m += m % 2
    fine = make_grid(m)
    pf = inverse(pad_to(SpectralField(f.grid, f.coeffs * f.grid.dealias_mask), fine).coeffs)
    pg = inverse(pad_to(SpectralField(g.grid, g.coeffs * g.grid.dealias_mask), fine).coeffs)
    return SpectralField(fine, forward(pf * pg))
