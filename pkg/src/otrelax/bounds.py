"""Finite-sample deviation bounds for empirical relaxed transport costs.

Everything here is an upper BOUND, assembled from a chaining integral
over covering numbers, never an estimate: with failure probability rho,
the population transport cost is covered by the empirical relaxed cost
plus

    epsilon(n, rho, zeta, K) + penalty(k, delta),

where K is the Lipschitz constant of the dual pair payoff, zeta the
chaining cut-off, and the penalty term

    penalty = lam * delta                                   (k = 1, lam > L(ctilde))
            = (2 L(ctilde)^(k/(k-1)) + 1) * delta^(1/k)     (k > 1, lam = delta^(-(k-1)/k))

accounts for the relaxation radius.  Flipping the roles of the empirical
and population measures gives a two-sided interval centered at the
empirical relaxed cost with radius epsilon + penalty at coverage 1 - 2*rho.

The chaining integrand mixes a covering number with a log factor that
jumps at the finitely many points where ceil(2*diam/xi) steps; the
integrator is adaptive Simpson with forced subdivision at those jumps
(and at the covering function's own jumps when they are enumerable).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import ValidationError

SIMPSON_REL_TOL = 1e-8
_SIMPSON_MAX_DEPTH = 48
_BREAKPOINT_CAP = 200_000


def covering_unit_cube(d: int, xi: float) -> float:
    """Covering number bound for [0,1]^d: (ceil(sqrt(d)/(2 xi)) + 1)^d.

    A grid of side 2*xi/sqrt(d) covers the cube with Euclidean balls of
    radius xi; the +1 pads the cell count conservatively.
    """
    if d < 1:
        raise ValidationError("d must be a positive integer")
    if not xi > 0.0:
        raise ValidationError(f"xi must be positive, got {xi!r}")
    return float((math.ceil(math.sqrt(d) / (2.0 * xi)) + 1) ** d)


def covering_constant_unit_cube(d: int) -> float:
    """H with covering_unit_cube(d, xi) <= H / xi^d for xi in (0, sqrt(d)]."""
    return float((2.5 * math.sqrt(d)) ** d)


def _cube_breakpoints(d: int):
    """Jump locations of covering_unit_cube(d, scale*xi) on [lo, hi]."""

    def breaks(lo: float, hi: float, scale: float):
        return _reciprocal_grid(math.sqrt(d) / (2.0 * scale), lo, hi)

    return breaks


@dataclass(frozen=True)
class BoundInputs:
    """Inputs of the deviation bound and the confidence radius.

    covering maps xi to a covering number of the sample domain;
    covering_breakpoints optionally maps (lo, hi, scale) to the jump
    locations of covering(scale * xi) so the integrator can subdivide
    there.  payoff_lipschitz may be left None when confidence_radius is
    asked to derive it from lam and the cost powers; lam is the dual
    multiplier (required for k = 1, where it must exceed
    lipschitz_ctilde) and lipschitz_ctilde the Lipschitz constant of the
    pricing cost.
    """

    n: int
    rho: float
    zeta: float
    k: float
    delta: float
    diameter: float
    covering: Callable[[float], float]
    covering_breakpoints: Optional[Callable[[float, float, float], list]] = None
    payoff_lipschitz: Optional[float] = None
    lam: Optional[float] = None
    lipschitz_ctilde: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("n must be a positive integer")
        if not 0.0 < self.rho < 1.0:
            raise ValidationError(f"rho must lie in (0, 1), got {self.rho!r}")
        if not self.zeta > 0.0:
            raise ValidationError(f"zeta must be positive, got {self.zeta!r}")
        if self.k < 1.0:
            raise ValidationError(f"k must be >= 1, got {self.k!r}")
        if self.delta < 0.0:
            raise ValidationError(f"delta must be >= 0, got {self.delta!r}")
        if not self.diameter > 0.0 or not math.isfinite(self.diameter):
            raise ValidationError("diameter must be positive and finite")

    @classmethod
    def for_unit_cube(cls, d: int, **kwargs) -> "BoundInputs":
        """Inputs wired to the unit-cube covering bound (diameter sqrt(d))."""
        kwargs.setdefault("diameter", math.sqrt(d))
        return cls(
            covering=lambda xi: covering_unit_cube(d, xi),
            covering_breakpoints=_cube_breakpoints(d),
            **kwargs,
        )


@dataclass(frozen=True)
class BoundReport:
    """Deviation bound, relaxation penalty, and their sum (all upper bounds)."""

    epsilon: float
    penalty: float
    radius: float
    lambda_used: float


def deviation_bound(inputs: BoundInputs) -> float:
    """sqrt(log(1/rho)/(2n)) + 4 zeta K + (8 sqrt(2) K / sqrt(n)) * integral.

    The integral runs xi from zeta/4 to 4*diameter over
    sqrt(covering(xi/4) * log(2 ceil(2 diam / xi) + 1)); an empty range
    (zeta/4 >= 4*diameter) contributes zero and only the first two terms
    remain.
    """
    K = _require_lipschitz(inputs)
    lo, hi = inputs.zeta / 4.0, 4.0 * inputs.diameter
    diam = inputs.diameter

    def integrand(xi: float) -> float:
        steps = math.ceil(2.0 * diam / xi)
        return math.sqrt(inputs.covering(xi / 4.0) * math.log(2.0 * steps + 1.0))

    integral = _integral_with_jumps(integrand, lo, hi, inputs, scale=0.25)
    return _assemble(inputs, K, integral)


def deviation_bound_refined(inputs: BoundInputs) -> float:
    """Tighter variant: integral to 2*diameter with the log terms split.

    Valid for connected, centered domains; integrand
    sqrt(covering(xi/2) * log 2 + log(2 ceil(2 diam / xi) + 1)).
    """
    K = _require_lipschitz(inputs)
    lo, hi = inputs.zeta / 4.0, 2.0 * inputs.diameter
    diam = inputs.diameter
    log2 = math.log(2.0)

    def integrand(xi: float) -> float:
        steps = math.ceil(2.0 * diam / xi)
        return math.sqrt(
            inputs.covering(xi / 2.0) * log2 + math.log(2.0 * steps + 1.0)
        )

    integral = _integral_with_jumps(integrand, lo, hi, inputs, scale=0.5)
    return _assemble(inputs, K, integral)


def relaxation_penalty(k: float, delta: float, lam, lipschitz_ctilde: float) -> float:
    """Additive penalty for the relaxation radius.

    k = 1 requires lam > lipschitz_ctilde and charges lam * delta; k > 1
    ignores lam and charges (2 L^(k/(k-1)) + 1) * delta^(1/k).
    """
    if delta < 0.0:
        raise ValidationError("delta must be >= 0")
    if k == 1.0:
        if lam is None or not lam > lipschitz_ctilde:
            raise ValidationError(
                f"k = 1 penalty needs lam > lipschitz_ctilde "
                f"({lam!r} vs {lipschitz_ctilde!r})"
            )
        return lam * delta
    if k < 1.0:
        raise ValidationError("k must be >= 1")
    L = lipschitz_ctilde
    return (2.0 * L ** (k / (k - 1.0)) + 1.0) * delta ** (1.0 / k)


def confidence_radius(inputs: BoundInputs, refined: bool = False) -> BoundReport:
    """Interval radius epsilon + penalty around the empirical relaxed cost.

    Coverage is 1 - 2*rho.  For k > 1 the multiplier is pinned to
    delta^(-(k-1)/k) (delta must be positive); for k = 1 the caller
    supplies it.  When payoff_lipschitz is None it is derived as
    lam * k * diameter^(k-1) + lipschitz_ctilde so the trade-off between
    the deviation and penalty terms stays visible in the report.
    """
    if inputs.k == 1.0:
        lam_used = inputs.lam
        if lam_used is None:
            raise ValidationError("k = 1 radius needs the dual multiplier lam")
    else:
        if not inputs.delta > 0.0:
            raise ValidationError("k > 1 radius needs delta > 0")
        lam_used = inputs.delta ** (-(inputs.k - 1.0) / inputs.k)
    K = inputs.payoff_lipschitz
    if K is None:
        L_c = inputs.k * inputs.diameter ** (inputs.k - 1.0)
        K = lam_used * L_c + inputs.lipschitz_ctilde
    eps_inputs = replace(inputs, payoff_lipschitz=K)
    eps = deviation_bound_refined(eps_inputs) if refined else deviation_bound(eps_inputs)
    penalty = relaxation_penalty(inputs.k, inputs.delta, lam_used, inputs.lipschitz_ctilde)
    return BoundReport(eps, penalty, eps + penalty, lam_used)


def cube_bound_at_cutoff(
    n: int,
    rho: float,
    zeta: float,
    d: int,
    payoff_lipschitz: float,
    H: Optional[float] = None,
    diameter: Optional[float] = None,
) -> float:
    """Closed-form unit-cube bound family at a fixed cut-off (d > 2).

    sqrt(log(1/rho)/n) + 4 zeta K
        + (8 sqrt(2) K / sqrt(n)) * (2^(d/2) sqrt(H log 2) (zeta/4)^(1-d/2) / (d/2-1)
                                     + 10 diameter).
    """
    if d <= 2:
        raise ValidationError("the closed-form cube family needs d > 2")
    if H is None:
        H = covering_constant_unit_cube(d)
    if diameter is None:
        diameter = math.sqrt(d)
    K = payoff_lipschitz
    chain = (
        2.0 ** (d / 2.0)
        * math.sqrt(H * math.log(2.0))
        * (zeta / 4.0) ** (1.0 - d / 2.0)
        / (d / 2.0 - 1.0)
    )
    return (
        math.sqrt(math.log(1.0 / rho) / n)
        + 4.0 * zeta * K
        + 8.0 * math.sqrt(2.0) * K / math.sqrt(n) * (chain + 10.0 * diameter)
    )


def optimized_cutoff_terms(
    n: int,
    rho: float,
    d: int,
    payoff_lipschitz: float,
    diameter: Optional[float] = None,
    H: Optional[float] = None,
):
    """The four terms of the cut-off-optimized cube bound (d > 2).

    The two middle terms decay like n^(-1/d) and dominate for large n,
    which is the usual curse-of-dimensionality rate of empirical
    transport costs.
    """
    if d <= 2:
        raise ValidationError("the optimized cube bound needs d > 2")
    if H is None:
        H = covering_constant_unit_cube(d)
    if diameter is None:
        diameter = math.sqrt(d)
    K = payoff_lipschitz
    base = 8.0 * math.log(2.0) * H
    t1 = math.sqrt(math.log(1.0 / rho) / n)
    t2 = 32.0 * K * (base / n) ** (1.0 / d)
    t3 = 8.0 * K * base ** (1.0 / d) / ((d / 2.0 - 1.0) * n ** (1.0 / d))
    t4 = 80.0 * math.sqrt(2.0) * diameter * K / math.sqrt(n)
    return t1, t2, t3, t4


def optimized_cutoff_bound(
    n: int,
    rho: float,
    d: int,
    payoff_lipschitz: float,
    diameter: Optional[float] = None,
    H: Optional[float] = None,
) -> float:
    """Cube bound with the cut-off eliminated; see optimized_cutoff_terms."""
    return sum(optimized_cutoff_terms(n, rho, d, payoff_lipschitz, diameter, H))


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------
def _assemble(inputs: BoundInputs, K: float, integral: float) -> float:
    return (
        math.sqrt(math.log(1.0 / inputs.rho) / (2.0 * inputs.n))
        + 4.0 * inputs.zeta * K
        + 8.0 * math.sqrt(2.0) * K / math.sqrt(inputs.n) * integral
    )


def _require_lipschitz(inputs: BoundInputs) -> float:
    if inputs.payoff_lipschitz is None:
        raise ValidationError("deviation bound needs payoff_lipschitz")
    if not inputs.payoff_lipschitz > 0.0:
        raise ValidationError("payoff_lipschitz must be positive")
    return inputs.payoff_lipschitz


def _integral_with_jumps(f, lo, hi, inputs: BoundInputs, scale: float) -> float:
    if lo >= hi:
        return 0.0
    points = _reciprocal_grid(2.0 * inputs.diameter, lo, hi)
    if inputs.covering_breakpoints is not None:
        points = points + list(inputs.covering_breakpoints(lo, hi, scale))
    return adaptive_simpson(f, lo, hi, breakpoints=points)


def _reciprocal_grid(numerator: float, lo: float, hi: float):
    """Points numerator/m (integer m) inside [lo, hi], largest first.

    Capped at _BREAKPOINT_CAP points starting from the largest (where the
    integrand's relative jumps are biggest); beyond the cap the adaptive
    integrator resolves the remaining, relatively tiny, steps.
    """
    m_lo = max(1, math.ceil(numerator / hi))
    m_hi = math.floor(numerator / lo)
    if m_hi < m_lo:
        return []
    m_hi = min(m_hi, m_lo + _BREAKPOINT_CAP)
    ms = np.arange(m_lo, m_hi + 1, dtype=float)
    return (numerator / ms).tolist()


def adaptive_simpson(f, a: float, b: float, breakpoints=(), rel_tol=SIMPSON_REL_TOL):
    """Adaptive Simpson quadrature with forced subdivision points.

    Piece-boundary evaluations are nudged inward by a relative 1e-12 so a
    jump sitting exactly on a subdivision point contributes its interior
    one-sided values; the nudge itself is far below the tolerance.
    """
    if not b > a:
        return 0.0
    inner = sorted({p for p in breakpoints if a < p < b})
    pts = [a] + inner + [b]
    pieces = list(zip(pts[:-1], pts[1:]))
    rough = 0.0
    cache = []
    for x0, x1 in pieces:
        nudge = (x1 - x0) * 1e-12
        fx0, fm, fx1 = f(x0 + nudge), f(0.5 * (x0 + x1)), f(x1 - nudge)
        whole = (x1 - x0) / 6.0 * (fx0 + 4.0 * fm + fx1)
        cache.append((fx0, fm, fx1, whole))
        rough += whole
    eps_total = max(rel_tol * abs(rough), 1e-300)
    total = 0.0
    for (x0, x1), (fx0, fm, fx1, whole) in zip(pieces, cache):
        eps = eps_total * (x1 - x0) / (b - a)
        total += _simpson_rec(f, x0, fx0, x1, fx1, fm, whole, eps, _SIMPSON_MAX_DEPTH)
    return total


def _simpson_rec(f, a, fa, b, fb, fm, whole, eps, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    if depth <= 0 or abs(left + right - whole) <= 15.0 * eps:
        return left + right + (left + right - whole) / 15.0
    return _simpson_rec(
        f, a, fa, m, fm, flm, left, eps / 2.0, depth - 1
    ) + _simpson_rec(f, m, fm, b, fb, frm, right, eps / 2.0, depth - 1)
