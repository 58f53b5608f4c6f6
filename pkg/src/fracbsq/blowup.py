"""Blow-up diagnostics: radius ladder, weighted-L1 functionals, lower-bound envelopes.

Nothing here asserts that a numerical run blows up.  Envelopes and the
corollary bound are overlays; T* is either supplied or extrapolated and is
always labelled by provenance.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.special import gammainc

from . import norms


def ladder_radii(a, sigma, n):
    """``(a / sqrt(sigma)^(n-1), a / (sigma sqrt(sigma)^(n-1)))`` for ladder level ``n``."""
    if n < 1:
        raise ValueError("ladder level n must be >= 1")
    r = a / math.sqrt(sigma) ** (n - 1)
    return r, r / sigma


def functional_from_l1(base, d):
    """``base^{2alpha/(2alpha-1)} + base^{2beta/(2beta-1)}``."""
    return base**d.exponent_alpha + base**d.exponent_beta


def blowup_functional(state, p, d, n):
    """Weighted-L1 functional at ladder level ``n`` (alpha, beta >= 1 required)."""
    d.require_blowup_regime()
    _, r1 = ladder_radii(p.a, p.sigma, n)
    return functional_from_l1(norms.pair_weighted_l1(state, r1, p.sigma), d)


def envelope(t, tstar, C, d=None):
    """Lower-bound curve ``(e^{C(T* - t)} - 1)^{-1}``."""
    if not C > 0:
        raise ValueError("C must be > 0")
    if not t < tstar:
        raise ValueError(f"envelope needs t < T*, got t={t}, T*={tstar}")
    if t < 0:
        raise ValueError("t must be >= 0")
    return 1.0 / math.expm1(C * (tstar - t))


def integral_criterion(series, t, tstar, n, d):
    """Trapezoid integral of the level-``n`` functional from ``t`` to the last record.

    The integrand at ``t`` is interpolated linearly when ``t`` falls between
    records.  The value is finite by construction; divergence can only be
    read off as a trend when the coverage end approaches ``tstar``.
    """
    times = series.times
    if len(times) == 0 or t < times[0] - 1e-12 or t > times[-1] + 1e-12:
        raise ValueError(f"t={t} outside the recorded range")
    if tstar is not None and times[-1] > tstar:
        raise ValueError("series extends beyond T*")
    vals = functional_from_l1(series.column(f"l1_pair_n{n}"), d)
    start = float(np.interp(t, times, vals))
    keep = times > t
    tt = np.concatenate([[t], times[keep]])
    vv = np.concatenate([[start], vals[keep]])
    if tt.size < 2:
        return 0.0
    return float(np.sum(0.5 * (vv[1:] + vv[:-1]) * np.diff(tt)))


def running_integral(times, values):
    """Cumulative trapezoid from the first sample; same length as ``times``."""
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    out = np.zeros_like(times)
    out[1:] = np.cumsum(0.5 * (values[1:] + values[:-1]) * np.diff(times))
    return out


def corollary_exponents(p, alpha, mu=1.6):
    """``(rho1, rho2, sigma0)`` with ``2 sigma0 = floor(2 sigma mu)``."""
    if not alpha >= 1:
        raise ValueError("alpha >= 1 required")
    if not mu > 1.5:
        raise ValueError(f"mu must be > 3/2, got {mu}")
    two_sigma0 = math.floor(2 * p.sigma * mu)
    sigma0 = two_sigma0 / 2
    rho1 = (1 - 2 * alpha) * (2 * (p.s * p.sigma + sigma0) + 1) / (6 * alpha * p.sigma)
    rho2 = (1 - 2 * alpha) / (3 * alpha * p.sigma)
    return rho1, rho2, sigma0


def corollary_bound(t, tstar, C1, C2, rho1, rho2):
    """``(e^{C1(T*-t)} - 1)^{rho1} exp{C2 (e^{C1(T*-t)} - 1)^{rho2}}``."""
    if not (0 <= t < tstar):
        raise ValueError(f"corollary bound needs 0 <= t < T*, got t={t}, T*={tstar}")
    if not (C1 > 0 and C2 > 0):
        raise ValueError("C1, C2 must be > 0")
    if not (rho1 < 0 and rho2 < 0):
        raise ValueError("rho1, rho2 must be < 0")
    bracket = math.expm1(C1 * (tstar - t))
    return bracket**rho1 * math.exp(C2 * bracket**rho2)


def tail_ratio(x, sigma0):
    """``x^{-(2 sigma0 + 1)} e^{-x/2} sum_{k >= 2 sigma0 + 1} x^k / k!``.

    Uses ``e^{-x} sum_{k>=m} x^k/k! = P(m, x)`` (regularized lower gamma).
    The function is bounded below by a positive constant on ``x > 0``.
    """
    m = int(round(2 * sigma0)) + 1
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0):
        raise ValueError("x must be > 0")
    return np.exp(-m * np.log(x) + 0.5 * x + np.log(gammainc(m, x)))


def _linearized_crossing(tq, yq):
    """Zero crossing of the most linear ``y**(-g)`` over a grid of exponents."""
    best = None
    for g in np.geomspace(0.05, 20.0, 241):
        z = yq ** (-g)
        coef = np.polyfit(tq, z, 1)
        if coef[0] >= 0:
            continue
        resid = z - np.polyval(coef, tq)
        score = math.sqrt(float(np.mean(resid**2))) / (z.max() - z.min())
        if best is None or score < best[0]:
            best = (score, -coef[1] / coef[0], g)
    return best


def estimate_tstar(series, values=None, min_records=8):
    """Extrapolated blow-up time from a growing norm record, or ``None``.

    ``series`` is a :class:`NormSeries` (its level-1 Gevrey pair norm is
    used) or an array of times paired with ``values``.  Over the final
    quarter of the records the growth is fitted in two stages: first the
    exponent ``g`` making ``values**(-g)`` most nearly linear in ``t`` gives
    a zero crossing; that seeds a least-squares fit of
    ``log y = log A - q log(e^{C(T - t)} - 1)`` whose ``T`` is returned (the
    fitted ``y**(-1/q)`` vanishes exactly at ``T``).  Returns ``None`` when
    the values are not strictly growing over the window.
    """
    if values is None:
        t = np.asarray(series.times, dtype=np.float64)
        y = np.asarray(series.column("gevrey_pair_n1"), dtype=np.float64)
    else:
        t = np.asarray(series, dtype=np.float64)
        y = np.asarray(values, dtype=np.float64)
    if t.size < min_records:
        return None
    start = min((3 * t.size) // 4, t.size - 4)
    tq, yq = t[start:], y[start:]
    if np.any(~np.isfinite(yq)) or np.any(yq <= 0) or np.any(np.diff(yq) <= 0):
        return None
    if yq[-1] <= yq[0] * (1 + 1e-9):
        return None
    first = _linearized_crossing(tq, yq)
    if first is None:
        return None
    _, t_lin, g = first
    span = tq[-1] - tq[0]
    t_init = max(t_lin, tq[-1] + 1e-3 * span)
    ly = np.log(yq)

    def resid(params):
        log_amp, q, log_c, tstar = params
        return ly - (log_amp - q * np.log(np.expm1(np.exp(log_c) * (tstar - tq))))

    best = None
    for c0 in (0.1 / span, 1.0 / span, 10.0 / (t_init - tq[0])):
        q0 = 1.0 / g
        log_amp0 = float(np.mean(ly + q0 * np.log(np.expm1(c0 * (t_init - tq)))))
        try:
            fit = least_squares(
                resid,
                [log_amp0, q0, math.log(c0), t_init],
                bounds=([-np.inf, 1e-6, -30.0, tq[-1] + 1e-12 * max(1.0, tq[-1])], [np.inf, 100.0, 30.0, np.inf]),
                x_scale="jac",
                xtol=1e-14,
                ftol=1e-14,
                gtol=1e-14,
                max_nfev=2000,
            )
        except (ValueError, FloatingPointError):
            continue
        if np.all(np.isfinite(fit.x)) and (best is None or fit.cost < best[0]):
            best = (fit.cost, float(fit.x[3]))
    if best is None:
        return float(t_lin) if t_lin >= tq[-1] else None
    return best[1]


def iv_domination_constant(grid, p, d, n):
    """Constant ``c`` with ``X^{pa} + X^{pb} >= c * (level-n L1 functional)``.

    ``X`` is the pair norm at radius ``a / sqrt(sigma)^n``; ``c`` follows
    from the lattice Cauchy-Schwarz constant ``K`` for four components:
    ``L1 <= K X`` hence ``c = 1 / max(K^{pa}, K^{pb})``.
    """
    _, r1 = ladder_radii(p.a, p.sigma, n)
    r_next, _ = ladder_radii(p.a, p.sigma, n + 1)
    K = norms.l1_gevrey_lattice_constant(grid, r1, r_next, p.sigma, p.s, components=4)
    return 1.0 / max(K**d.exponent_alpha, K**d.exponent_beta)


@dataclass
class BlowupDiagnostics:
    times: np.ndarray
    tstar_estimate: float
    tstar_source: str
    C_envelope: float
    ladder_norms: dict
    ladder_l1: dict
    functionals: dict
    integrals: dict
    envelope_values: np.ndarray
    corollary: dict = field(default_factory=dict)
    corollary_values: np.ndarray = None

    def columns(self):
        cols = {"time": self.times}
        for n in sorted(self.ladder_norms):
            cols[f"gevrey_pair_n{n}"] = self.ladder_norms[n]
        for n in sorted(self.ladder_l1):
            cols[f"l1_pair_n{n}"] = self.ladder_l1[n]
        for n in sorted(self.functionals):
            cols[f"functional_n{n}"] = self.functionals[n]
        for n in sorted(self.integrals):
            cols[f"integral_n{n}"] = self.integrals[n]
        cols["envelope"] = self.envelope_values
        cols["corollary_bound"] = self.corollary_values
        return cols


def diagnose(series, p, d, tstar=None, C=1.0, mu=1.6, C1=None, C2=1.0):
    """Every ladder, functional, integral and envelope quantity for a series.

    ``tstar`` is user-supplied or extrapolated from the level-1 pair norm;
    envelope and corollary columns are NaN where ``t >= T*`` or T* is
    unknown.  ``C1`` defaults to ``C``.
    """
    d.require_blowup_regime()
    times = series.times
    source = "user"
    if tstar is None:
        tstar = estimate_tstar(series)
        source = "extrapolated" if tstar is not None else "absent"
    ladder, l1, funcs, ints = {}, {}, {}, {}
    for n in range(1, series.nmax + 1):
        ladder[n] = series.column(f"gevrey_pair_n{n}")
        l1[n] = series.column(f"l1_pair_n{n}")
        funcs[n] = functional_from_l1(l1[n], d)
        ints[n] = running_integral(times, funcs[n])
    env = np.full(times.shape, np.nan)
    cor = np.full(times.shape, np.nan)
    corollary = {}
    if d.alpha == d.beta:
        rho1, rho2, sigma0 = corollary_exponents(p, d.alpha, mu)
        corollary = {"rho1": rho1, "rho2": rho2, "sigma0": sigma0, "C1": C1 or C, "C2": C2, "mu": mu}
    if tstar is not None:
        for j, t in enumerate(times):
            if 0 <= t < tstar:
                env[j] = envelope(t, tstar, C, d)
                if corollary:
                    cor[j] = corollary_bound(t, tstar, corollary["C1"], C2, rho1, rho2)
    return BlowupDiagnostics(
        times=times,
        tstar_estimate=tstar,
        tstar_source=source,
        C_envelope=C,
        ladder_norms=ladder,
        ladder_l1=l1,
        functionals=funcs,
        integrals=ints,
        envelope_values=env,
        corollary=corollary,
        corollary_values=cor,
    )
