"""Sobolev-Gevrey, weighted L1, homogeneous Sobolev and L2 norms on the lattice.

All sums run over the normalized coefficients ``c_k`` of
:mod:`fracbsq.spectral`; the zero mode never contributes.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GevreyParams:
    """Gevrey radius ``a``, Gevrey index ``sigma`` and Sobolev exponent ``s``.

    ``sigma > 1`` and ``a >= 0`` always hold.  The range ``0 <= s < 3/2`` and
    ``a > 0`` are only demanded by operations that need them (see
    :meth:`require_existence_range`); norm evaluation accepts any real ``s``.
    """

    a: float
    sigma: float
    s: float = 0.0

    def __post_init__(self):
        for name in ("a", "sigma", "s"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"gevrey.{name} must be finite")
        if self.sigma <= 1:
            raise ValueError(f"gevrey.sigma must be > 1, got {self.sigma}")
        if self.a < 0:
            raise ValueError(f"gevrey.a must be >= 0, got {self.a}")

    def require_existence_range(self):
        if not self.a > 0:
            raise ValueError(f"gevrey.a must be > 0 here, got {self.a}")
        if not 0 <= self.s < 1.5:
            raise ValueError(f"gevrey.s must lie in [0, 3/2) here, got {self.s}")
        return self

    def with_radius(self, a):
        return GevreyParams(a, self.sigma, self.s)


@dataclass(frozen=True)
class DissipationParams:
    """Fractional dissipation orders: ``alpha`` for velocity, ``beta`` for temperature."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0.5 and self.beta > 0.5):
            raise ValueError(
                f"dissipation.alpha and dissipation.beta must be > 1/2, got {self.alpha}, {self.beta}"
            )

    def require_blowup_regime(self):
        if not (self.alpha >= 1 and self.beta >= 1):
            raise ValueError(
                f"alpha >= 1 and beta >= 1 required here, got {self.alpha}, {self.beta}"
            )
        return self

    @property
    def exponent_alpha(self):
        """``2 alpha / (2 alpha - 1)``."""
        return 2 * self.alpha / (2 * self.alpha - 1)

    @property
    def exponent_beta(self):
        return 2 * self.beta / (2 * self.beta - 1)


def gevrey_weight(grid, a, sigma, s):
    """``|k|**(2s) * exp(2a |k|**(1/sigma))`` per mode, 0 at ``k = 0``."""
    kmag = grid.kmag
    nz = kmag > 0
    w = np.zeros(grid.shape)
    km = kmag[nz]
    w[nz] = km ** (2.0 * s) * np.exp(2.0 * a * km ** (1.0 / sigma))
    return w


def _weighted_sq_sum(f, weight):
    mag2 = (np.abs(f.coeffs) ** 2).sum(axis=0)
    return float(np.sum(weight * mag2, dtype=np.float64)) * f.grid.normalization


def gevrey_norm_raw(f, a, sigma, s):
    """Gevrey norm without any parameter-range policy."""
    return math.sqrt(_weighted_sq_sum(f, gevrey_weight(f.grid, a, sigma, s)))


def gevrey_norm(f, p):
    """``[sum_k |k|^{2s} e^{2a|k|^{1/sigma}} |c_k|^2]^{1/2}``; vector fields add in squares."""
    return gevrey_norm_raw(f, p.a, p.sigma, p.s)


def sobolev_norm(f, delta):
    """Homogeneous Sobolev norm of order ``delta`` (Gevrey norm at ``a = 0``)."""
    return gevrey_norm_raw(f, 0.0, 2.0, delta)


def l2_norm(f):
    return sobolev_norm(f, 0.0)


def weighted_l1_norm(f, a_eff, sigma):
    """``sum_k e^{a_eff |k|^{1/sigma}} |c_k|``, summed over components."""
    if a_eff < 0:
        raise ValueError("a_eff must be >= 0")
    kmag = f.grid.kmag
    nz = kmag > 0
    w = np.zeros(f.grid.shape)
    w[nz] = np.exp(a_eff * kmag[nz] ** (1.0 / sigma))
    total = np.sum(w * np.abs(f.coeffs), dtype=np.float64)
    return float(total) * f.grid.amplitude_scale


def pair_norm(state, p):
    """Root-sum-square of the velocity and temperature Gevrey norms."""
    return math.hypot(gevrey_norm(state.u_hat, p), gevrey_norm(state.theta_hat, p))


def pair_norm_raw(state, a, sigma, s):
    return math.hypot(
        gevrey_norm_raw(state.u_hat, a, sigma, s), gevrey_norm_raw(state.theta_hat, a, sigma, s)
    )


def pair_l2_norm(state):
    return math.hypot(l2_norm(state.u_hat), l2_norm(state.theta_hat))


def pair_weighted_l1(state, a_eff, sigma):
    """``||(u_hat, theta_hat)||_{L1} = ||u_hat||_{L1} + ||theta_hat||_{L1}`` with the Gevrey weight."""
    return weighted_l1_norm(state.u_hat, a_eff, sigma) + weighted_l1_norm(state.theta_hat, a_eff, sigma)


def l1_gevrey_lattice_constant(grid, l1_radius, norm_radius, sigma, s, components=1):
    """Finite-lattice Cauchy-Schwarz constant ``K`` with

        weighted_l1_norm(f, l1_radius) <= K * gevrey_norm(f, norm_radius, s)

    for every field on the retained modes of ``grid`` with the given number
    of components (``K`` includes the ``sqrt(components)`` from summing the
    component norms).
    """
    kmag = grid.kmag[grid.dealias_mask & (grid.kmag > 0)]
    ratio = np.exp(2.0 * (l1_radius - norm_radius) * kmag ** (1.0 / sigma)) * kmag ** (-2.0 * s)
    return math.sqrt(components * float(np.sum(ratio)))
