"""Relaxed optimal transport over a transport ball around one marginal.

The relaxed cost between mu0 and nu is the cheapest ctilde-transport cost
to nu achievable from any measure within c-transport distance delta of
mu0.  By duality it equals

    -(min over lam >= 0 of)  lam * delta + max_pi E_pi[payoff(W, Y, lam)]

where the max runs over couplings of (mu0, nu) and the payoff is the
closed-form inner maximization from :mod:`otrelax.costs`.  The scalar
dual objective is convex in lam with computable one-sided derivatives

    left  = delta + min over optimal plans of E[d(payoff)/d(lam)],
    right = delta + max over optimal plans of E[d(payoff)/d(lam)],

so the generic solver runs a derivative-sign bisection: parameter-free,
convergence-guaranteed, and exercising the same derivative oracle a
subgradient scheme would.  Closed-form fast paths cover the order-1 cost
pair (threshold formula max(G0 - delta, 0)) and the quadratic pair.

delta = 0 always bypasses the lam search and solves plain transport: the
optimal lam may be unbounded there (reported as inf), with the inner
maximizer pinned to x* = w.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import costs
from .costs import CostSpec
from .errors import SolverError, ValidationError
from .measures import DiscreteMeasure
from .transport import TransportPlan, max_plan_with_extremes, solve_ot, solve_ot_max

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 200
_MAX_DOUBLINGS = 60


@dataclass(frozen=True, eq=False)
class RelaxedProblem:
    """Relaxation instance: marginals, ball radius, and the two costs.

    ctilde prices the transport to nu; c defines the ball around mu0.
    """

    mu0: DiscreteMeasure
    nu: DiscreteMeasure
    delta: float
    ctilde: CostSpec
    c: CostSpec

    def __post_init__(self):
        if self.mu0.dim != self.nu.dim:
            raise ValidationError(
                f"marginal dimensions differ: {self.mu0.dim} vs {self.nu.dim}"
            )
        if not (np.isfinite(self.delta) and self.delta >= 0.0):
            raise ValidationError(f"delta must be finite and >= 0, got {self.delta!r}")


@dataclass(frozen=True, eq=False)
class DualEvaluation:
    """One evaluation of the dual objective at a fixed lam.

    deriv_lo/deriv_hi are the one-sided derivatives over the set of
    payoff-optimal plans (NaN when derivatives were not requested).
    """

    lam: float
    objective: float
    deriv_lo: float
    deriv_hi: float
    plan: TransportPlan


@dataclass(frozen=True, eq=False)
class MapAtom:
    """One transported atom: nu's atom y_idx, mu0's atom w_idx, inner point x."""

    y_idx: int
    w_idx: int
    x: np.ndarray
    mass: float


@dataclass(frozen=True, eq=False)
class RelaxedSolution:
    """Solved relaxation.

    value is the relaxed cost (>= 0), lambda_star the dual minimizer (inf
    when delta = 0 leaves it unbounded), plan the optimal coupling under
    the payoff at lambda_star, and left_deriv/right_deriv the one-sided
    dual-objective derivatives there.  At lambda_star = 0 both fields
    report the right-hand derivative (the left one does not exist).
    """

    value: float
    lambda_star: float
    plan: TransportPlan
    map_points: tuple
    left_deriv: float
    right_deriv: float


def dual_objective(
    problem: RelaxedProblem, lam: float, derivatives: bool = True
) -> DualEvaluation:
    """Evaluate lam*delta + max-coupling payoff, with derivative interval.

    The derivative extremes come from re-optimizing the per-pair payoff
    lam-derivative over the optimal-plan face; skipping them
    (derivatives=False) saves two restricted solves.
    """
    if not (np.isfinite(lam) and lam >= 0.0):
        raise ValidationError(f"lambda must be finite and >= 0, got {lam!r}")
    H, dlo, dhi = costs.payoff_matrices(
        problem.ctilde, problem.c, problem.mu0.points, problem.nu.points, lam
    )
    if derivatives:
        plan, lo, hi = max_plan_with_extremes(problem.mu0, problem.nu, H, dlo, dhi)
        return DualEvaluation(
            lam, lam * problem.delta + plan.value,
            problem.delta + lo, problem.delta + hi, plan,
        )
    plan = solve_ot_max(problem.mu0, problem.nu, H)
    return DualEvaluation(
        lam, lam * problem.delta + plan.value, math.nan, math.nan, plan
    )


def solve_relaxed(
    problem: RelaxedProblem,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> RelaxedSolution:
    """Generic solver: derivative-sign bisection on the convex dual objective.

    Expands the search interval by doubling from lam = 1 until the lower
    derivative turns nonnegative, then bisects on the derivative sign
    until the bracket is narrower than tol or the derivative interval
    contains zero.  Returns the best evaluated point.
    """
    if not tol > 0.0:
        raise ValidationError(f"tol must be positive, got {tol!r}")
    if problem.delta == 0.0:
        return _plain_route(problem)

    evals = 0

    def evaluate(lam):
        nonlocal evals
        evals += 1
        if evals > max_iter:
            raise SolverError(
                f"lambda search did not converge within {max_iter} evaluations"
            )
        return dual_objective(problem, lam)

    best = evaluate(0.0)
    if best.deriv_hi >= 0.0:
        return _finish(problem, best)

    # bracket expansion: stop once the minimum cannot lie to the right
    hi_eval = evaluate(1.0)
    best = min(best, hi_eval, key=lambda e: e.objective)
    doublings = 0
    while hi_eval.deriv_lo < 0.0:
        if hi_eval.deriv_hi >= 0.0:  # stationary: 0 in [deriv_lo, deriv_hi]
            return _finish(problem, hi_eval)
        doublings += 1
        if doublings > _MAX_DOUBLINGS:
            raise SolverError("dual objective kept decreasing; lambda unbounded?")
        hi_eval = evaluate(hi_eval.lam * 2.0)
        best = min(best, hi_eval, key=lambda e: e.objective)

    lo_lam, hi_lam = 0.0, hi_eval.lam
    while hi_lam - lo_lam >= tol:
        mid = evaluate(0.5 * (lo_lam + hi_lam))
        best = min(best, mid, key=lambda e: e.objective)
        if mid.deriv_hi < 0.0:
            lo_lam = mid.lam
        elif mid.deriv_lo > 0.0:
            hi_lam = mid.lam
        else:
            break
    return _finish(problem, best)


def solve_relaxed_order1(problem: RelaxedProblem) -> RelaxedSolution:
    """Closed form for ctilde = c = Euclidean distance.

    One plain transport solve; value = max(G0 - delta, 0) with the dual
    minimizer at lam = 1 when G0 > delta and at lam = 0 otherwise.
    """
    _require_powers(problem, 1.0, 1.0)
    dist = costs.distance_matrix(problem.mu0.points, problem.nu.points)
    plan0 = solve_ot(problem.mu0, problem.nu, dist)
    g0 = plan0.value
    delta = problem.delta
    if g0 > delta:
        lam = 1.0
        value = g0 - delta
        plan = TransportPlan(plan0.mass, -g0, -plan0.dual_alpha, -plan0.dual_beta)
        left, right = delta - g0, delta
    else:
        lam = 0.0
        value = 0.0
        plan = TransportPlan(
            plan0.mass, 0.0, np.zeros(problem.mu0.n_atoms), np.zeros(problem.nu.n_atoms)
        )
        left = right = delta - g0
    return _with_map(problem, value, lam, plan, left, right)


def solve_relaxed_quadratic(problem: RelaxedProblem) -> RelaxedSolution:
    """Closed form for ctilde = c = squared Euclidean.

    One quadratic transport solve for H0; the dual minimizer is
    lam = (sqrt(H0/delta) - 1)+ and the value (sqrt(H0) - sqrt(delta))^2
    when H0 > delta, else 0.  delta = 0 routes to plain transport.
    """
    _require_powers(problem, 2.0, 2.0)
    if problem.delta == 0.0:
        return _plain_route(problem)
    sq = costs.squared_distance_matrix(problem.mu0.points, problem.nu.points)
    plan0 = solve_ot(problem.mu0, problem.nu, sq)
    h0 = plan0.value
    delta = problem.delta
    if h0 > delta:
        lam = math.sqrt(h0 / delta) - 1.0
        value = (math.sqrt(h0) - math.sqrt(delta)) ** 2
    else:
        lam = 0.0
        value = 0.0
    shrink = lam / (1.0 + lam)
    plan = TransportPlan(
        plan0.mass, -shrink * h0, -shrink * plan0.dual_alpha, -shrink * plan0.dual_beta
    )
    deriv = delta - h0 / (1.0 + lam) ** 2
    return _with_map(problem, value, lam, plan, deriv, deriv)


def quadratic_value(h0: float, delta: float) -> float:
    """Relaxed quadratic cost from the plain cost: (sqrt(h0) - sqrt(delta))^2+."""
    if h0 <= delta:
        return 0.0
    return (math.sqrt(h0) - math.sqrt(delta)) ** 2


def recover_map(solution: RelaxedSolution, problem: RelaxedProblem):
    """Transported atoms (y_idx, w_idx, inner maximizer, mass).

    For every plan entry carrying mass, the inner point is the maximizer
    of -ctilde(x, y) - lambda_star * c(x, w); pushing the plan mass
    forward to those points yields the optimizing measure inside the ball.
    """
    entries = []
    mass = solution.plan.mass
    for i, j in sorted(solution.plan.support(), key=lambda c: (c[1], c[0])):
        x = costs.inner_argmax(
            problem.ctilde,
            problem.c,
            problem.mu0.points[i],
            problem.nu.points[j],
            solution.lambda_star,
        )
        entries.append(MapAtom(j, i, x, float(mass[i, j])))
    return entries


def map_pushforward(entries) -> DiscreteMeasure:
    """Measure carried by the recovered map: atoms at the inner points."""
    if not entries:
        raise ValidationError("cannot build a measure from an empty map")
    pts = np.array([e.x for e in entries])
    w = np.array([e.mass for e in entries])
    return DiscreteMeasure(pts, w)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------
def _plain_route(problem: RelaxedProblem) -> RelaxedSolution:
    """delta = 0: the ball degenerates to {mu0}; plain transport under ctilde."""
    C = costs.cost_matrix(problem.ctilde, problem.mu0.points, problem.nu.points)
    plan = solve_ot(problem.mu0, problem.nu, C)
    value = max(plan.value, 0.0)
    return _with_map(problem, value, math.inf, plan, 0.0, 0.0)


def _finish(problem: RelaxedProblem, ev: DualEvaluation) -> RelaxedSolution:
    value = max(-ev.objective, 0.0)
    return _with_map(problem, value, ev.lam, ev.plan, ev.deriv_lo, ev.deriv_hi)


def _with_map(problem, value, lam, plan, left, right) -> RelaxedSolution:
    sol = RelaxedSolution(value, lam, plan, (), left, right)
    entries = tuple(recover_map(sol, problem))
    return RelaxedSolution(value, lam, plan, entries, left, right)


def _require_powers(problem: RelaxedProblem, ctilde_power: float, c_power: float):
    if problem.ctilde.power != ctilde_power or problem.c.power != c_power:
        raise ValidationError(
            f"closed form needs cost powers ({ctilde_power:g}, {c_power:g}), got "
            f"({problem.ctilde.power:g}, {problem.c.power:g})"
        )
