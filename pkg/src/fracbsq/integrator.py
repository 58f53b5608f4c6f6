"""Second-order exponential time differencing (ETD2RK) for the fractional Boussinesq system.

The fractional dissipation is integrated exactly per mode; advection and the
buoyancy ``theta e_3`` are treated explicitly with exponential quadrature
weights, and the velocity update is Leray-projected.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import norms
from .blowup import ladder_radii
from .semigroup import buoyancy, phi1, psi1, symbol
from .spectral import CoupledState, SpectralField, leray_project, nonlinear_advection

log = logging.getLogger(__name__)

BLOWUP_NORM = 1e12


class NumericalBlowup(FloatingPointError):
    """A step produced nonfinite coefficients (candidate numerical blow-up)."""


def default_dt(grid, d):
    """``0.25 / max |k|^{max(2 alpha, 2 beta)}`` over retained modes."""
    return 0.25 / grid.kmag_retained_max() ** max(2 * d.alpha, 2 * d.beta)


def nonlinear_rhs(state):
    """Explicit part ``(-P(u.grad u) + P(theta e_3), -u.grad theta)`` as a ``(4, n, n, n)`` array."""
    u = state.u_hat
    adv_u = leray_project(nonlinear_advection(u, u))
    adv_t = nonlinear_advection(u, state.theta_hat)
    out = np.empty((4,) + state.grid.shape, dtype=np.complex128)
    out[:3] = buoyancy(state.theta_hat).coeffs - adv_u.coeffs
    out[3] = -adv_t.coeffs[0]
    return out


@lru_cache(maxsize=32)
def _etd_coefficients(n, dt, alpha, beta):
    from .spectral import make_grid

    grid = make_grid(n)
    lam = np.empty((4,) + grid.shape)
    lam[:3] = symbol(grid, alpha)
    lam[3] = symbol(grid, beta)
    z = lam * dt
    p1 = phi1(z)
    p2 = p1 - psi1(z)
    expo = np.exp(-z)
    for arr in (expo, p1, p2):
        arr.setflags(write=False)
    return expo, dt * p1, dt * p2


def _project_state(arr, grid, time):
    u = leray_project(SpectralField(grid, arr[:3] * grid.dealias_mask))
    theta = SpectralField(grid, arr[3:4] * grid.dealias_mask)
    return CoupledState(u, theta, time)


def etd_step(state, dt, p, d, dt_max=None):
    """One ETD2RK step of size ``dt``; raises :class:`NumericalBlowup` on nonfinite output."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    if dt_max is not None and dt > dt_max * (1 + 1e-12):
        raise ValueError(f"dt={dt} exceeds the configured stability bound {dt_max}")
    grid = state.grid
    expo, w1, w2 = _etd_coefficients(grid.n, float(dt), float(d.alpha), float(d.beta))
    x = state.as_array()
    n0 = nonlinear_rhs(state)
    a = _project_state(expo * x + w1 * n0, grid, state.time + dt)
    n1 = nonlinear_rhs(a)
    out = _project_state(a.as_array() + w2 * (n1 - n0), grid, state.time + dt)
    if not out.is_finite():
        raise NumericalBlowup(f"nonfinite coefficients after step to t={state.time + dt:g}")
    return out


def series_columns(nmax):
    cols = ["time", "l2_pair"]
    cols += [f"gevrey_pair_n{i}" for i in range(1, nmax + 1)]
    cols += [f"l1_pair_n{i}" for i in range(1, nmax + 1)]
    cols += ["u_gevrey_s_plus_alpha", "theta_gevrey_s_plus_beta", "u_hdot_alpha", "theta_hdot_beta"]
    return tuple(cols)


def norm_record(state, p, d, nmax):
    rec = [state.time, norms.pair_l2_norm(state)]
    radii = [ladder_radii(p.a, p.sigma, i) for i in range(1, nmax + 1)]
    rec += [norms.pair_norm_raw(state, r, p.sigma, p.s) for r, _ in radii]
    rec += [norms.pair_weighted_l1(state, r1, p.sigma) for _, r1 in radii]
    rec += [
        norms.gevrey_norm_raw(state.u_hat, p.a, p.sigma, p.s + d.alpha),
        norms.gevrey_norm_raw(state.theta_hat, p.a, p.sigma, p.s + d.beta),
        norms.sobolev_norm(state.u_hat, d.alpha),
        norms.sobolev_norm(state.theta_hat, d.beta),
    ]
    return rec


@dataclass
class NormSeries:
    """One row of norms per recorded time; column order from :func:`series_columns`."""

    nmax: int
    rows: list = field(default_factory=list)

    @property
    def columns(self):
        return series_columns(self.nmax)

    def append(self, row):
        if len(row) != len(self.columns):
            raise ValueError("row length does not match the column layout")
        self.rows.append(tuple(float(v) for v in row))

    def __len__(self):
        return len(self.rows)

    def array(self):
        if not self.rows:
            return np.zeros((0, len(self.columns)))
        return np.array(self.rows, dtype=np.float64)

    def column(self, name):
        return self.array()[:, self.columns.index(name)]

    @property
    def times(self):
        return self.column("time")


@dataclass
class EvolveResult:
    final: CoupledState
    series: NormSeries
    checkpoints: list
    aborted: bool = False
    reason: str = ""
    dt: float = 0.0


def evolve(
    x0,
    t_end,
    dt,
    p,
    d,
    ladder_nmax=4,
    checkpoint_every=0,
    on_checkpoint=None,
    dt_max=None,
    blowup_norm=BLOWUP_NORM,
):
    """March ``x0`` to ``t_end`` recording a :class:`NormSeries` row per step.

    The step is shrunk to ``t_end / ceil(t_end / dt)`` so that the last node
    lands on ``t_end``.  Every ``checkpoint_every`` steps the state is handed
    to ``on_checkpoint(step, state)`` (or kept in memory when no callback).
    Nonfinite values or a pair norm above ``blowup_norm`` stop the run with
    ``aborted=True``; the series up to that point is kept.
    """
    if t_end < 0:
        raise ValueError("t_end must be >= 0")
    series = NormSeries(ladder_nmax)
    t0 = x0.time
    series.append(norm_record(x0, p, d, ladder_nmax))
    checkpoints = []
    if t_end == 0:
        return EvolveResult(x0, series, checkpoints, dt=0.0)
    steps = max(1, math.ceil(t_end / dt - 1e-9))
    h = t_end / steps
    state = x0

    def keep(step, st):
        if on_checkpoint is None:
            checkpoints.append((step, st))
        else:
            checkpoints.append(on_checkpoint(step, st))

    for j in range(1, steps + 1):
        try:
            nxt = etd_step(state, h, p, d, dt_max=dt_max)
        except NumericalBlowup as exc:
            log.warning("run aborted: %s", exc)
            keep(j - 1, state)
            return EvolveResult(state, series, checkpoints, True, str(exc), h)
        state = nxt.at_time(t0 + j * h)
        rec = norm_record(state, p, d, ladder_nmax)
        series.append(rec)
        if not all(math.isfinite(v) for v in rec) or rec[2] > blowup_norm:
            reason = f"pair norm {rec[2]:.3e} at t={state.time:g} exceeds {blowup_norm:g} (candidate blow-up)"
            log.warning("run aborted: %s", reason)
            keep(j, state)
            return EvolveResult(state, series, checkpoints, True, reason, h)
        if checkpoint_every and j % checkpoint_every == 0:
            keep(j, state)
    return EvolveResult(state, series, checkpoints, False, "", h)


def energy_excess(series):
    """Per-step ``d(E/2) + dt*D - dt*|(u,theta)|^2`` from consecutive rows.

    ``E`` is the squared L2 pair norm and ``D`` the dissipation
    ``|(-Delta)^{alpha/2} u|^2 + |(-Delta)^{beta/2} theta|^2`` at the step start.
    """
    t = series.times
    e = series.column("l2_pair") ** 2
    diss = series.column("u_hdot_alpha") ** 2 + series.column("theta_hdot_beta") ** 2
    dt = np.diff(t)
    return 0.5 * np.diff(e) + dt * diss[:-1] - dt * e[:-1]


def gronwall_ratios(series):
    """``|(u,theta)(t)|_{L2} / (e^t |(u0,theta0)|_{L2})`` per row."""
    t = series.times
    l2 = series.column("l2_pair")
    if l2[0] == 0:
        return np.zeros_like(l2)
    return l2 / (np.exp(t - t[0]) * l2[0])


def young_violations(series, C_hat, d):
    """Steps where ``d|x|^2/dt + dissipation > C (N^{pa} + N^{pb} + 1) N^2`` (logged, not fatal).

    ``N`` is the Gevrey pair norm at the base radius (ladder level 1) at the
    start of the step.
    """
    t = series.times
    nrm = series.column("gevrey_pair_n1")
    diss = series.column("u_gevrey_s_plus_alpha") ** 2 + series.column("theta_gevrey_s_plus_beta") ** 2
    out = []
    for j in range(len(t) - 1):
        dt = t[j + 1] - t[j]
        lhs = (nrm[j + 1] ** 2 - nrm[j] ** 2) / dt + diss[j]
        N = nrm[j]
        rhs = C_hat * (N ** d.exponent_alpha + N ** d.exponent_beta + 1.0) * N**2
        if lhs > rhs:
            out.append((float(t[j]), float(lhs), float(rhs)))
    if out:
        log.info("differential inequality exceeded at %d of %d steps", len(out), len(t) - 1)
    return out


def integrate_on_nodes(x0, times, p, d):
    """ETD2RK states at every node of a uniform partition (one step per interval)."""
    from .semigroup import Trajectory, check_uniform

    times = check_uniform(times)
    states = [x0.at_time(times[0])]
    for j in range(1, times.size):
        states.append(etd_step(states[-1], times[j] - times[j - 1], p, d).at_time(times[j]))
    return Trajectory(times, tuple(states))
