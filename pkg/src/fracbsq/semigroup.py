"""Fractional heat semigroup, exponential Duhamel quadrature and the mild-form operators."""

from dataclasses import dataclass

import numpy as np

from .spectral import CoupledState, SpectralField, leray_project, nonlinear_advection

_SERIES_CUTOFF = 0.1
_SERIES_TERMS = 12


def phi1(z):
    """``(1 - e^{-z}) / z = int_0^1 e^{-z r} dr`` (1 at ``z = 0``)."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    small = z < _SERIES_CUTOFF
    zs = z[small]
    acc = np.zeros_like(zs)
    term = np.ones_like(zs)
    for m in range(_SERIES_TERMS):
        acc += term / (m + 1)
        term = term * (-zs) / (m + 1)
    out[small] = acc
    zl = z[~small]
    out[~small] = -np.expm1(-zl) / zl
    return out


def psi1(z):
    """``int_0^1 e^{-z r} r dr = (1 - e^{-z} - z e^{-z}) / z**2`` (1/2 at ``z = 0``)."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    small = z < _SERIES_CUTOFF
    zs = z[small]
    acc = np.zeros_like(zs)
    term = np.ones_like(zs)
    for m in range(_SERIES_TERMS):
        acc += term / (m + 2)
        term = term * (-zs) / (m + 1)
    out[small] = acc
    zl = z[~small]
    out[~small] = (-np.expm1(-zl) - zl * np.exp(-zl)) / zl**2
    return out


def symbol(grid, gamma):
    """``|k|**(2 gamma)`` with 0 at the zero mode."""
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    out = np.zeros(grid.shape)
    nz = grid.kmag > 0
    out[nz] = grid.kmag[nz] ** (2.0 * gamma)
    return out


def semigroup_multiplier(grid, t, gamma):
    """Per-mode weights ``exp(-t |k|**(2 gamma))`` of the fractional heat semigroup."""
    if t < 0:
        raise ValueError(f"semigroup time must be >= 0, got {t}")
    return np.exp(-t * symbol(grid, gamma))


def apply_semigroup(f, t, gamma):
    return f.with_coeffs(f.coeffs * semigroup_multiplier(f.grid, t, gamma))


def exponential_weights(lam, h):
    """Weights ``(w_left, w_right)`` of the exact exponential integral of a linear interpolant.

    ``int_0^h e^{-(h-s) lam} [F0 (1 - s/h) + F1 s/h] ds = w_left F0 + w_right F1``.
    """
    z = lam * h
    p1 = phi1(z)
    ps = psi1(z)
    return h * ps, h * (p1 - ps)


def _partial_weights(lam, r, h):
    """Weights for ``int_0^r e^{-(r-s) lam} [F0 + (F1 - F0) s/h] ds``."""
    z = lam * r
    p1 = phi1(z)
    ps = psi1(z)
    w_right = r * r * (p1 - ps) / h
    return r * p1 - w_right, w_right


def check_uniform(times):
    times = np.asarray(times, dtype=np.float64)
    if times.ndim != 1 or times.size < 1:
        raise ValueError("time partition must be a nonempty 1D sequence")
    if times.size > 1:
        steps = np.diff(times)
        dt = (times[-1] - times[0]) / (times.size - 1)
        if np.any(steps <= 0) or np.max(np.abs(steps - dt)) > 1e-12 * max(1.0, abs(times[-1])):
            raise ValueError("time partition must be strictly increasing and uniform")
    return times


def duhamel_integral(times, samples, t, gamma):
    """``int_0^t e^{-(t - tau)(-Delta)^gamma} F(tau) dtau`` for sampled forcing.

    ``samples[j]`` is the forcing at ``times[j]`` (``times[0] == 0``); the
    forcing is interpolated linearly in ``tau`` and the kernel integrated
    exactly per mode.
    """
    times = check_uniform(times)
    if len(samples) != times.size:
        raise ValueError("one forcing sample per time node required")
    if abs(times[0]) > 1e-14:
        raise ValueError("forcing partition must start at 0")
    if t < 0 or t > times[-1] * (1 + 1e-12) + 1e-15:
        raise ValueError(f"t={t} outside the sampled range [0, {times[-1]}]")
    first = samples[0]
    if t == 0 or times.size == 1:
        return first.with_coeffs(np.zeros_like(first.coeffs))
    h = times[1] - times[0]
    lam = symbol(first.grid, gamma)
    j = min(int(np.floor(t / h + 1e-9)), times.size - 1)
    acc = np.zeros_like(first.coeffs)
    if j > 0:
        decay = np.exp(-lam * h)
        wl, wr = exponential_weights(lam, h)
        for i in range(j):
            acc = decay * acc + wl * samples[i].coeffs + wr * samples[i + 1].coeffs
    r = t - times[j]
    if r > 1e-14 * max(1.0, t) and j + 1 < times.size:
        wl, wr = _partial_weights(lam, r, h)
        acc = np.exp(-lam * r) * acc + wl * samples[j].coeffs + wr * samples[j + 1].coeffs
    return first.with_coeffs(acc)


def duhamel_trajectory(h, forcing, gamma, grid):
    """Duhamel integral at every node of a uniform partition with step ``h``.

    ``forcing`` is an array ``(m, c, n, n, n)`` of raw coefficients; returns an
    array of the same shape whose node ``j`` holds the integral up to ``t_j``.
    """
    lam = symbol(grid, gamma)
    decay = np.exp(-lam * h)
    wl, wr = exponential_weights(lam, h)
    out = np.zeros_like(forcing)
    for j in range(1, forcing.shape[0]):
        out[j] = decay * out[j - 1] + wl * forcing[j - 1] + wr * forcing[j]
    return out


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States on a uniform partition of ``[0, T]`` sharing one grid."""

    times: np.ndarray
    states: tuple

    def __post_init__(self):
        times = check_uniform(self.times)
        if len(self.states) != times.size:
            raise ValueError("one state per time node required")
        n = self.states[0].grid.n
        if any(s.grid.n != n for s in self.states):
            raise ValueError("all trajectory states must share one grid")
        times = times.copy()
        times.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", tuple(self.states))

    @classmethod
    def from_array(cls, grid, times, arr):
        """``arr`` has shape ``(m, 4, n, n, n)`` holding ``(u1, u2, u3, theta)``."""
        return cls(times, tuple(CoupledState.from_array(grid, arr[j], times[j]) for j in range(len(times))))

    @property
    def grid(self):
        return self.states[0].grid

    @property
    def dt(self):
        if self.times.size < 2:
            return 0.0
        return float((self.times[-1] - self.times[0]) / (self.times.size - 1))

    def as_array(self):
        return np.stack([s.as_array() for s in self.states])

    def __len__(self):
        return len(self.states)

    def node_index(self, t):
        j = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[j] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"t={t} is not a node of the partition")
        return j


def uniform_times(T, nodes):
    """``nodes`` equally spaced instants covering ``[0, T]``."""
    if nodes < 2:
        raise ValueError("need at least two time nodes")
    return T * np.arange(nodes) / (nodes - 1)


def free_evolution(x0, times, d):
    """``(e^{-t(-Delta)^alpha} u0, e^{-t(-Delta)^beta} theta0)`` at each time."""
    states = []
    for t in times:
        states.append(
            CoupledState(apply_semigroup(x0.u_hat, t, d.alpha), apply_semigroup(x0.theta_hat, t, d.beta), t)
        )
    return Trajectory(np.asarray(times, dtype=np.float64), tuple(states))


def _same_partition(x, y):
    if x.times.size != y.times.size or np.max(np.abs(x.times - y.times)) > 1e-12:
        raise ValueError("trajectories live on different partitions")
    if x.grid.n != y.grid.n:
        raise ValueError("trajectories live on different grids")


def bilinear_forcing(x, y):
    """Forcing samples ``(-P(w.grad gamma), -(w.grad phi))`` for ``x = (w, v)``, ``y = (gamma, phi)``."""
    _same_partition(x, y)
    fu, ft = [], []
    for sx, sy in zip(x.states, y.states):
        fu.append(-leray_project(nonlinear_advection(sx.u_hat, sy.u_hat)).coeffs)
        ft.append(-nonlinear_advection(sx.u_hat, sy.theta_hat).coeffs)
    return np.stack(fu), np.stack(ft)


def bilinear_B_all(x, y, d):
    """``B(x, y)`` at every node, as raw arrays ``(m, 3, ...)`` and ``(m, 1, ...)``."""
    fu, ft = bilinear_forcing(x, y)
    h = x.dt
    return duhamel_trajectory(h, fu, d.alpha, x.grid), duhamel_trajectory(h, ft, d.beta, x.grid)


def bilinear_B(x, y, t, d):
    """``(B1, B2)(t)`` as SpectralFields: minus the Duhamel integrals of the advection terms."""
    fu, ft = bilinear_forcing(x, y)
    grid = x.grid
    us = [SpectralField(grid, c) for c in fu]
    ts = [SpectralField(grid, c) for c in ft]
    return duhamel_integral(x.times, us, t, d.alpha), duhamel_integral(x.times, ts, t, d.beta)


def buoyancy(theta):
    """``P[theta e_3]``."""
    lifted = np.zeros((3,) + theta.grid.shape, dtype=np.complex128)
    lifted[2] = theta.coeffs[0]
    return leray_project(SpectralField(theta.grid, lifted))


def linear_forcing(x):
    return np.stack([buoyancy(s.theta_hat).coeffs for s in x.states])


def linear_L_all(x, d):
    fu = linear_forcing(x)
    out_u = duhamel_trajectory(x.dt, fu, d.alpha, x.grid)
    return out_u, np.zeros((len(x), 1) + x.grid.shape, dtype=np.complex128)


def linear_L(x, t, d):
    """``(L1, L2)(t)`` with ``L1`` the Duhamel integral of ``P[theta e_3]`` and ``L2 = 0``."""
    grid = x.grid
    us = [SpectralField(grid, c) for c in linear_forcing(x)]
    return duhamel_integral(x.times, us, t, d.alpha), SpectralField.zeros(grid, 1)


def mild_map(free, a, d):
    """``free + B(a, a) + L(a)`` evaluated at every node of ``a``'s partition."""
    bu, bt = bilinear_B_all(a, a, d)
    lu, _ = linear_L_all(a, d)
    arr = free.as_array().copy()
    arr[:, :3] += bu + lu
    arr[:, 3:] += bt
    return Trajectory.from_array(a.grid, a.times, arr)
