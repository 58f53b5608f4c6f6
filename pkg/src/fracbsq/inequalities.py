"""Executable two-sided checks of the functional inequalities used by the solver.

Every ``check_*`` returns an :class:`InequalityReport`.  Inequalities whose
constant is abstract take a :class:`ConstantEstimate` produced by
:func:`estimate_constant`, an empirical supremum of the constant-free ratio
over a seeded sample stream, inflated by a safety factor.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import norms
from ._parallel import ordered_map
from .norms import DissipationParams, GevreyParams
from .semigroup import bilinear_B_all, free_evolution, uniform_times
from .spectral import SpectralField, exact_product, random_coefficients, random_divfree_state

SLACK = 1e-9

CONSTANT_IDS = (
    "product",
    "product_interp_i",
    "product_interp_ii",
    "l1_interp",
    "embedding",
    "bilinear",
)


@dataclass(frozen=True)
class InequalityReport:
    lhs: float
    rhs: float
    ratio: float
    witness: str
    holds: bool


def make_report(lhs, rhs, witness="", log_ratio=None):
    """Build a report; ``log_ratio`` overrides ``lhs/rhs`` when both sides under/overflow."""
    lhs, rhs = float(lhs), float(rhs)
    if log_ratio is not None:
        ratio = math.exp(min(log_ratio, 700.0))
        holds = log_ratio <= math.log1p(SLACK)
    elif rhs == 0.0:
        ratio = 0.0 if lhs == 0.0 else math.inf
        holds = lhs == 0.0
    else:
        ratio = lhs / rhs
        holds = ratio <= 1.0 + SLACK
    return InequalityReport(lhs, rhs, ratio, witness, bool(holds))


@dataclass(frozen=True)
class ConstantEstimate:
    """``value = safety_factor * max_ratio`` over ``samples`` seeded draws."""

    value: float
    samples: int
    seed: int
    safety_factor: float
    max_ratio: float = math.nan
    which: str = ""

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError("constant value must be > 0")
        if self.safety_factor < 1:
            raise ValueError("safety_factor must be >= 1")

    @classmethod
    def fixed(cls, value, which=""):
        """A user-supplied constant (no sampling provenance)."""
        return cls(float(value), 0, 0, 1.0, float(value), which)


def _const(c):
    return c.value if isinstance(c, ConstantEstimate) else float(c)


# -- constant-free lemmas -------------------------------------------------


def check_pointwise_decay(a, b, lam):
    """``lam**a e^{-b lam} <= a**a (e b)**(-a)`` for positive ``a, b, lam``."""
    if not (a > 0 and b > 0 and lam > 0):
        raise ValueError("pointwise decay needs a, b, lambda > 0")
    log_lhs = a * math.log(lam) - b * lam
    log_rhs = a * math.log(a) - a * (1.0 + math.log(b))
    return make_report(
        math.exp(log_lhs) if log_lhs < 700 else math.inf,
        math.exp(log_rhs) if log_rhs < 700 else math.inf,
        f"a={a!r} b={b!r} lambda={lam!r}",
        log_ratio=log_lhs - log_rhs,
    )


def check_exponent_triangle(xi, eta, a, sigma):
    """``e^{a|xi|^{1/sigma}} <= e^{a|xi-eta|^{1/sigma}} e^{a|eta|^{1/sigma}}``."""
    if a < 0 or sigma < 1:
        raise ValueError("exponent triangle needs a >= 0, sigma >= 1")
    xi = np.asarray(xi, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    p = 1.0 / sigma
    e_lhs = a * np.linalg.norm(xi) ** p
    e_rhs = a * np.linalg.norm(xi - eta) ** p + a * np.linalg.norm(eta) ** p
    return make_report(
        math.exp(min(e_lhs, 709.0)),
        math.exp(min(e_rhs, 709.0)),
        f"xi={xi.tolist()} eta={eta.tolist()} a={a!r} sigma={sigma!r}",
        log_ratio=float(e_lhs - e_rhs),
    )


def check_interpolation(f, p, theta):
    """``||f||_{s+1} <= ||f||_s^{1-1/theta} ||f||_{s+theta}^{1/theta}`` (constant 1)."""
    if theta < 1:
        raise ValueError("theta must be >= 1")
    lhs = norms.gevrey_norm_raw(f, p.a, p.sigma, p.s + 1)
    lo = norms.gevrey_norm_raw(f, p.a, p.sigma, p.s)
    hi = norms.gevrey_norm_raw(f, p.a, p.sigma, p.s + theta)
    rhs = lo ** (1 - 1 / theta) * hi ** (1 / theta)
    return make_report(lhs, rhs, f"interpolation theta={theta!r} {p}")


def interpolation_log_ratios(mag2, grid, p, theta):
    """Vectorized ``log(lhs/rhs)`` of :func:`check_interpolation` for a batch.

    ``mag2`` has shape ``(batch, n, n, n)`` holding ``|F_k|**2`` summed over components.
    """
    w = norms.gevrey_weight(grid, p.a, p.sigma, p.s)
    k2 = grid.k2
    flat = mag2.reshape(mag2.shape[0], -1)
    s0 = flat @ w.ravel()
    s1 = flat @ (w * k2).ravel()
    st = flat @ (w * k2**theta).ravel()
    return 0.5 * (np.log(s1) - (1 - 1 / theta) * np.log(s0) - (1 / theta) * np.log(st))


# -- constant-bearing lemmas ----------------------------------------------


def _product_range(p):
    p.require_existence_range()


def product_sides(f, g, p):
    lhs = norms.gevrey_norm(exact_product(f, g), p)
    return lhs, norms.gevrey_norm(f, p) * norms.gevrey_norm(g, p)


def check_product_estimate(f, g, p, c):
    """``||fg||_{a,sigma,s} <= C ||f|| ||g||`` with ``fg`` formed alias-free."""
    _product_range(p)
    lhs, base = product_sides(f, g, p)
    return make_report(lhs, _const(c) * base, f"product {p}")


def product_interp_sides(f, g, p, d, variant):
    a, sig, s = p.a, p.sigma, p.s
    al, be = d.alpha, d.beta
    gn = lambda h, e: norms.gevrey_norm_raw(h, a, sig, e)  # noqa: E731
    lhs = norms.gevrey_norm_raw(exact_product(f, g), a, sig, s + 1)
    g_interp = gn(g, s) ** (1 - 1 / be) * gn(g, s + be) ** (1 / be)
    f_interp = gn(f, s) ** (1 - 1 / al) * gn(f, s + al) ** (1 / al)
    if variant == "i":
        base = (
            norms.weighted_l1_norm(f, a / sig, sig) * g_interp
            + norms.weighted_l1_norm(g, a / sig, sig) * f_interp
        )
    elif variant == "ii":
        base = gn(f, s) * g_interp + gn(g, s) * f_interp
    else:
        raise ValueError(f"variant must be 'i' or 'ii', got {variant!r}")
    return lhs, base


def check_product_interp(f, g, p, d, variant, c):
    """``||fg||_{s+1}`` against the weighted-L1 (``i``) or pure-norm (``ii``) bound."""
    if not p.a > 0:
        raise ValueError("product interpolation needs a > 0")
    if not -1 <= p.s < 1.5:
        raise ValueError(f"product interpolation needs s in [-1, 3/2), got {p.s}")
    d.require_blowup_regime()
    lhs, base = product_interp_sides(f, g, p, d, variant)
    return make_report(lhs, _const(c) * base, f"product_interp {variant} {p} {d}")


def l1_interp_sides(f, delta):
    lhs = norms.weighted_l1_norm(f, 0.0, 2.0)
    e = 3 / (2 * delta)
    return lhs, norms.l2_norm(f) ** (1 - e) * norms.sobolev_norm(f, delta) ** e


def check_l1_interpolation(f, delta, c):
    """``||f_hat||_{L1} <= C ||f||_{L2}^{1-3/(2 delta)} ||f||_{H^delta}^{3/(2 delta)}``."""
    if not delta > 1.5:
        raise ValueError(f"delta must be > 3/2, got {delta}")
    lhs, base = l1_interp_sides(f, delta)
    return make_report(lhs, _const(c) * base, f"l1_interp delta={delta!r}")


def check_embedding(f, p, delta, c):
    """``||f||_{H^delta} <= C ||f||_{a,sigma,s}``."""
    p.require_existence_range()
    if not delta >= 1.5:
        raise ValueError(f"delta must be >= 3/2, got {delta}")
    lhs = norms.sobolev_norm(f, delta)
    return make_report(lhs, _const(c) * norms.gevrey_norm(f, p), f"embedding delta={delta!r} {p}")


# -- operator bound for the mild-form bilinear term -------------------------


def bilinear_time_factor(t, d):
    return t ** (1 - 1 / (2 * d.alpha)) + t ** (1 - 1 / (2 * d.beta))


def bilinear_ratio(x, y, p, d):
    """``max_t ||B(x,y)(t)|| / ((t^{1-1/2alpha} + t^{1-1/2beta}) ||x||_X ||y||_X)``.

    ``||.||_X`` is the sup over nodes of the pair norm.
    """
    bu, bt = bilinear_B_all(x, y, d)
    grid = x.grid
    sup_x = max(norms.pair_norm(s, p) for s in x.states)
    sup_y = max(norms.pair_norm(s, p) for s in y.states)
    if sup_x == 0 or sup_y == 0:
        return 0.0
    best = 0.0
    for j in range(1, len(x)):
        num = math.hypot(
            norms.gevrey_norm(SpectralField(grid, bu[j]), p),
            norms.gevrey_norm(SpectralField(grid, bt[j]), p),
        )
        best = max(best, num / (bilinear_time_factor(x.times[j], d) * sup_x * sup_y))
    return best


# -- sampling and constant estimation -------------------------------------


def sample_rng(seed, index):
    """Generator for sample ``index`` of stream ``seed`` (independent of batch size)."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


def random_scalar_field(rng, grid):
    """Random real mean-free field with random spectral slope and band limit."""
    decay = rng.uniform(0.0, 3.0)
    kmax = rng.uniform(1.5, grid.cutoff * math.sqrt(3.0))
    return SpectralField(grid, random_coefficients(rng, grid, 1, decay, 1.0, kmax=kmax))


def _sample_ratio(which, p, d, grid, seed, index, delta, horizon, nodes):
    rng = sample_rng(seed, index)
    if which == "product":
        lhs, base = product_sides(random_scalar_field(rng, grid), random_scalar_field(rng, grid), p)
    elif which in ("product_interp_i", "product_interp_ii"):
        f = random_scalar_field(rng, grid)
        g = random_scalar_field(rng, grid)
        lhs, base = product_interp_sides(f, g, p, d, which.rsplit("_", 1)[1])
    elif which == "l1_interp":
        lhs, base = l1_interp_sides(random_scalar_field(rng, grid), delta)
    elif which == "embedding":
        f = random_scalar_field(rng, grid)
        lhs, base = norms.sobolev_norm(f, delta), norms.gevrey_norm(f, p)
    elif which == "bilinear":
        times = uniform_times(horizon, nodes)
        seeds = rng.integers(0, 2**63 - 1, size=2)
        x0 = random_divfree_state(int(seeds[0]), grid, rng.uniform(1.0, 3.0), 1.0)
        y0 = random_divfree_state(int(seeds[1]), grid, rng.uniform(1.0, 3.0), 1.0)
        return bilinear_ratio(free_evolution(x0, times, d), free_evolution(y0, times, d), p, d)
    else:
        raise ValueError(f"unknown inequality id {which!r}; expected one of {CONSTANT_IDS}")
    return lhs / base if base > 0 else 0.0


def _validate_which(which, p, d, delta):
    if which not in CONSTANT_IDS:
        raise ValueError(f"unknown inequality id {which!r}; expected one of {CONSTANT_IDS}")
    if which in ("l1_interp", "embedding"):
        if delta is None:
            raise ValueError(f"{which} needs delta")
        if which == "l1_interp" and not delta > 1.5:
            raise ValueError("delta must be > 3/2")
        if which == "embedding" and not delta >= 1.5:
            raise ValueError("delta must be >= 3/2")
    if which in ("product", "embedding", "bilinear"):
        p.require_existence_range()
    if which.startswith("product_interp"):
        if not (p.a > 0 and -1 <= p.s < 1.5):
            raise ValueError("product interpolation needs a > 0 and s in [-1, 3/2)")
        d.require_blowup_regime()


def sample_ratios(which, p, d, grid, seed, start, count, delta=None, horizon=1.0, nodes=9):
    """Constant-free ratios for samples ``start .. start+count-1`` of stream ``seed``."""
    _validate_which(which, p, d, delta)
    return np.array(
        ordered_map(
            lambda i: _sample_ratio(which, p, d, grid, seed, i, delta, horizon, nodes),
            range(start, start + count),
        )
    )


def estimate_constant(which, p, d, grid, samples, seed, safety_factor=1.0, delta=None, horizon=1.0, nodes=9):
    """Empirical constant: ``safety_factor * max`` ratio over the first ``samples`` draws."""
    if samples < 100:
        raise ValueError("estimate_constant needs samples >= 100")
    ratios = sample_ratios(which, p, d, grid, seed, 0, samples, delta, horizon, nodes)
    top = float(ratios.max())
    if not top > 0:
        raise ValueError(f"all sampled ratios vanished for {which!r}")
    return ConstantEstimate(safety_factor * top, samples, seed, float(safety_factor), top, which)
