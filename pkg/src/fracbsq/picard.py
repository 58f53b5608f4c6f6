"""Banach fixed-point construction of the local mild solution and its certificate."""

import logging
import math
from dataclasses import dataclass, field

from . import norms
from .inequalities import ConstantEstimate, bilinear_time_factor, estimate_constant
from .semigroup import Trajectory, free_evolution, mild_map, uniform_times
from .spectral import random_divfree_state

log = logging.getLogger(__name__)

SHAVE = 0.99
BOUND_SLACK = 1e-6


def existence_time(p, d, initial_norm, C):
    """``0.99 * min{[sqrt(8 C N) + 1]^{-4a/(2a-1)}, [sqrt(8 C N) + 1]^{-4b/(2b-1)}}``."""
    if not C > 0:
        raise ValueError(f"bilinear constant must be > 0, got {C}")
    if initial_norm < 0:
        raise ValueError("initial norm must be >= 0")
    bracket = math.sqrt(8.0 * C * initial_norm) + 1.0
    ea = 4 * d.alpha / (2 * d.alpha - 1)
    eb = 4 * d.beta / (2 * d.beta - 1)
    return SHAVE * min(bracket ** (-ea), bracket ** (-eb))


def contraction_constants(T, C, d):
    """``(C1, C2) = (T, C [T^{1-1/2alpha} + T^{1-1/2beta}])``."""
    return T, C * bilinear_time_factor(T, d)


def small_data_ok(initial_norm, C1, C2):
    return 4.0 * C2 * initial_norm < (1.0 - C1) ** 2


def gate_at(p, d, initial_norm, C):
    T = existence_time(p, d, initial_norm, C)
    C1, C2 = contraction_constants(T, C, d)
    return small_data_ok(initial_norm, C1, C2)


def small_data_threshold(p, d, C, upper=1e6):
    """Largest initial pair norm (to ~1e-6 relative) passing the small-data gate.

    The gate is scanned on a decreasing geometric grid from ``upper`` and
    then refined by bisection between the first passing point and its
    failing neighbour.
    """
    n_hi = upper
    n = upper
    while not gate_at(p, d, n, C):
        n_hi = n
        n /= 2.0
        if n < 1e-300:
            return 0.0
    if n == upper:
        return upper
    lo, hi = n, n_hi
    while hi - lo > 1e-6 * lo:
        mid = 0.5 * (lo + hi)
        if gate_at(p, d, mid, C):
            lo = mid
        else:
            hi = mid
    return lo


def trajectory_distance(x, y, p):
    """``sup_t`` pair norm of ``x(t) - y(t)`` (the X-norm of the difference)."""
    diff = x.as_array() - y.as_array()
    grid = x.grid
    out = 0.0
    for j in range(diff.shape[0]):
        st = type(x.states[0]).from_array(grid, diff[j])
        out = max(out, norms.pair_norm(st, p))
    return out


def sup_pair_norm(x, p):
    return max(norms.pair_norm(s, p) for s in x.states)


@dataclass
class PicardResult:
    trajectory: Trajectory
    residuals: list
    converged: bool


def picard_iterate(x0, T, time_nodes, p, d, tol=1e-10, max_iter=64, start=None):
    """Iterate ``a -> free + B(a, a) + L(a)`` on ``time_nodes`` nodes of ``[0, T]``.

    ``start`` overrides the initial guess (default: the free evolution).
    The residual of step ``m`` is the X-norm of ``a^{(m+1)} - a^{(m)}``.
    """
    if not T > 0:
        raise ValueError("T must be > 0")
    times = uniform_times(T, time_nodes)
    free = free_evolution(x0, times, d)
    a = free if start is None else start
    residuals = []
    for _ in range(max_iter):
        nxt = mild_map(free, a, d)
        res = trajectory_distance(nxt, a, p)
        residuals.append(res)
        a = nxt
        if not math.isfinite(res):
            break
        if res < tol:
            return PicardResult(a, residuals, True)
    return PicardResult(a, residuals, False)


def contraction_ratios(residuals):
    """Successive ratios ``r_{m+1} / r_m`` over the nonzero part of the history."""
    r = [x for x in residuals if x > 0]
    return [b / a for a, b in zip(r, r[1:])]


@dataclass
class CertifyConfig:
    time_nodes: int = 64
    tol: float = 1e-10
    max_iter: int = 64
    constant_samples: int = 128
    constant_seed: int = 12345
    constant_safety: float = 2.0
    constant_horizon: float = 1.0
    constant_nodes: int = 9
    bilinear_constant: ConstantEstimate = None


@dataclass
class ExistenceCertificate:
    params: tuple
    initial_norm: float
    bilinear_constant: ConstantEstimate
    linear_constant: float
    admissible_T: float
    contraction_C2: float
    small_data_check: bool
    iterations: int
    final_residual: float
    residuals: list
    solution_sup_norm: float
    fixed_point_bound: float
    radius_bound: float
    solution_norm_bound_ok: bool
    converged: bool
    tol: float
    time_nodes: int
    trajectory: Trajectory = field(default=None, repr=False)
    trajectory_ref: str = ""

    @property
    def valid(self):
        return (
            self.small_data_check
            and self.converged
            and self.final_residual < self.tol
            and self.solution_norm_bound_ok
        )

    def measured_contraction(self):
        ratios = contraction_ratios(self.residuals)
        return max(ratios) if ratios else 0.0


def certify(x0, p, d, cfg=None):
    """Run the whole existence pipeline for ``x0`` and return a certificate."""
    cfg = cfg or CertifyConfig()
    p.require_existence_range()
    grid = x0.grid
    C_hat = cfg.bilinear_constant
    if C_hat is None:
        C_hat = estimate_constant(
            "bilinear",
            p,
            d,
            grid,
            cfg.constant_samples,
            cfg.constant_seed,
            cfg.constant_safety,
            horizon=cfg.constant_horizon,
            nodes=cfg.constant_nodes,
        )
    C = C_hat.value
    N0 = norms.pair_norm(x0, p)
    T = existence_time(p, d, N0, C)
    C1, C2 = contraction_constants(T, C, d)
    gate = small_data_ok(N0, C1, C2)
    fixed_point_bound = 2.0 * N0 / (1.0 - C1)
    radius_bound = (1.0 - T) / (2.0 * C2)
    common = dict(
        params=(p, d),
        initial_norm=N0,
        bilinear_constant=C_hat,
        linear_constant=C1,
        admissible_T=T,
        contraction_C2=C2,
        small_data_check=gate,
        fixed_point_bound=fixed_point_bound,
        radius_bound=radius_bound,
        tol=cfg.tol,
        time_nodes=cfg.time_nodes,
    )
    if not gate:
        log.info("small-data gate failed: 4*C2*|x0|=%g >= (1-C1)^2=%g", 4 * C2 * N0, (1 - C1) ** 2)
        return ExistenceCertificate(
            iterations=0,
            final_residual=math.inf,
            residuals=[],
            solution_sup_norm=math.nan,
            solution_norm_bound_ok=False,
            converged=False,
            **common,
        )
    result = picard_iterate(x0, T, cfg.time_nodes, p, d, cfg.tol, cfg.max_iter)
    sup = sup_pair_norm(result.trajectory, p)
    bound_ok = sup <= fixed_point_bound * (1 + BOUND_SLACK) and sup <= radius_bound * (1 + BOUND_SLACK)
    return ExistenceCertificate(
        iterations=len(result.residuals),
        final_residual=result.residuals[-1] if result.residuals else 0.0,
        residuals=list(result.residuals),
        solution_sup_norm=sup,
        solution_norm_bound_ok=bool(bound_ok),
        converged=result.converged,
        trajectory=result.trajectory,
        **common,
    )


def uniqueness_probe(x0, T, time_nodes, p, d, tol=1e-10, max_iter=64, probe_seed=987654321):
    """X-distance between fixed points reached from two unrelated starting guesses.

    The first start is the free evolution of ``x0``; the second is the free
    evolution of an independent random state of the same norm.  A zero start
    would be no test: its first iterate is exactly the free evolution.
    """
    a = picard_iterate(x0, T, time_nodes, p, d, tol, max_iter)
    other = random_divfree_state(probe_seed, x0.grid)
    size = norms.pair_norm(x0, p)
    other = other.scaled(size / norms.pair_norm(other, p)) if size > 0 else other.scaled(0.0)
    b = picard_iterate(x0, T, time_nodes, p, d, tol, max_iter, start=free_evolution(other, a.trajectory.times, d))
    return trajectory_distance(a.trajectory, b.trajectory, p), a, b
