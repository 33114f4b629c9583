"""Exact discrete optimal transport via the transportation simplex (MODI).

Solves min sum_ij mass_ij * cost_ij over nonnegative matrices whose row
sums match mu's weights and column sums match nu's weights.  The solver
keeps a spanning-tree basis over the bipartite node set (rows, columns):

* initial basis from the northwest-corner rule,
* dual potentials propagated over the tree (alpha_i + beta_j = cost_ij
  on basic cells),
* entering cell by the most-negative reduced cost, switching permanently
  to Bland's smallest-index rule after a streak of degenerate pivots so
  cycling is impossible,
* leaving cell by the ratio test on the unique basis cycle, ties broken
  by smallest cell index (Bland-consistent).

Degeneracy is additionally broken by perturbing supply i by i * 1e-12
(balance restored on the last demand); the perturbation is re-absorbed at
the end by recomputing the basic flows from the original marginals over
the final tree, which also removes accumulated pivot drift.

Secondary optimization over the set of optimal plans reuses the machinery:
by complementary slackness that set is the transportation polytope
restricted to zero-reduced-cost cells, and the re-solve warm-starts from
the final basis (whose cells all lie on that face).

Module tolerances: feasibility ``FEASIBILITY_TOL``, reduced-cost
optimality ``OPTIMALITY_TOL``.  Every solve self-checks strong duality
(primal value vs. potential value) before returning.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import SolverError, ValidationError
from .measures import DiscreteMeasure

FEASIBILITY_TOL = 1e-8
OPTIMALITY_TOL = 1e-9
DUALITY_TOL = 1e-7
MASS_EPS = 1e-12
_PERTURB = 1e-12


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Optimal coupling with dual certificates.

    mass[i, j] is the mass moved from atom i of the first measure to atom
    j of the second; value is the objective; (dual_alpha, dual_beta) are
    optimal potentials with alpha_i + beta_j <= cost_ij everywhere and
    equality on the support (>= and equality for maximization solves).
    """

    mass: np.ndarray
    value: float
    dual_alpha: np.ndarray
    dual_beta: np.ndarray

    def support(self):
        """Indices (i, j) carrying more than MASS_EPS mass."""
        ii, jj = np.nonzero(self.mass > MASS_EPS)
        return list(zip(ii.tolist(), jj.tolist()))


@dataclass(eq=False)
class _Basis:
    """Final simplex state: basis tree and flows for perturbed marginals."""

    flows: dict
    adj: list
    ap: np.ndarray
    bp: np.ndarray


def solve_ot(mu: DiscreteMeasure, nu: DiscreteMeasure, cost: np.ndarray) -> TransportPlan:
    """Minimize the expected cost over couplings of mu and nu.

    cost[i, j] is the cost of moving mu's atom i onto nu's atom j; entries
    may be negative but must be finite.
    """
    plan, _ = _solve_checked(mu, nu, cost)
    return plan


def solve_ot_max(mu: DiscreteMeasure, nu: DiscreteMeasure, payoff: np.ndarray) -> TransportPlan:
    """Maximize the expected payoff over couplings: solve_ot on -payoff."""
    plan = solve_ot(mu, nu, -np.asarray(payoff, dtype=float))
    return TransportPlan(plan.mass, -plan.value, -plan.dual_alpha, -plan.dual_beta)


def optimal_plan_extremes(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    payoff: np.ndarray,
    secondary: np.ndarray,
):
    """Range of a secondary linear functional over the payoff-optimal plans.

    First maximizes the payoff, then re-optimizes the secondary objective
    lexicographically over the optimal face.  Returns (min, max) of
    sum_ij mass_ij * secondary_ij over that face.
    """
    _, lo, hi = max_plan_with_extremes(mu, nu, payoff, secondary, secondary)
    return lo, hi


def max_plan_with_extremes(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    payoff: np.ndarray,
    secondary_for_min: np.ndarray,
    secondary_for_max: np.ndarray,
):
    """Maximize the payoff and bound two secondary functionals in one pass.

    Returns (plan, lo, hi) where plan maximizes the payoff, lo is the
    minimum of secondary_for_min over all payoff-optimal plans and hi the
    maximum of secondary_for_max.  Shares the primary solve between the
    two face-restricted re-solves.
    """
    payoff = np.asarray(payoff, dtype=float)
    neg = -payoff
    if neg.shape != (mu.n_atoms, nu.n_atoms):
        raise ValidationError(
            f"payoff shape {neg.shape} does not match measures "
            f"({mu.n_atoms} x {nu.n_atoms})"
        )
    plan_min, basis = _solve_checked(mu, nu, neg, validated=True)
    plan = TransportPlan(
        plan_min.mass, -plan_min.value, -plan_min.dual_alpha, -plan_min.dual_beta
    )
    # optimal face: cells whose reduced cost vanishes for the min problem
    slack = neg - plan_min.dual_alpha[:, None] - plan_min.dual_beta[None, :]
    face = slack <= OPTIMALITY_TOL
    lo = _face_optimum(mu, nu, basis, face, secondary_for_min, maximize=False)
    hi = _face_optimum(mu, nu, basis, face, secondary_for_max, maximize=True)
    return plan, lo, hi


def _face_optimum(mu, nu, basis, face, secondary, maximize):
    secondary = np.asarray(secondary, dtype=float)
    if secondary.shape != face.shape:
        raise ValidationError("secondary functional shape must match the payoff")
    C = -secondary if maximize else secondary
    flows = dict(basis.flows)
    adj = [set(s) for s in basis.adj]
    mass, _, _ = _simplex_core(
        basis.ap, basis.bp, C, mu.weights, nu.weights, flows, adj, allowed=face
    )
    stray = float(np.sum(mass[~face]))
    if stray > 1e-9:
        raise SolverError(
            f"optimal-face re-solve left {stray:.3e} mass off the face; "
            "primary tolerance too tight for this instance"
        )
    value = float(np.sum(mass * secondary))
    return value


def _solve_checked(mu, nu, cost, validated=False):
    cost = np.asarray(cost, dtype=float)
    if not validated:
        if cost.shape != (mu.n_atoms, nu.n_atoms):
            raise ValidationError(
                f"cost shape {cost.shape} does not match measures "
                f"({mu.n_atoms} x {nu.n_atoms})"
            )
    if not np.all(np.isfinite(cost)):
        raise ValidationError("cost entries must be finite")
    m, n = cost.shape
    pert = np.arange(m, dtype=float) * _PERTURB
    ap = mu.weights + pert
    bp = nu.weights.copy()
    bp[-1] += float(pert.sum())
    flows, adj = _northwest_corner(ap, bp)
    mass, alpha, beta = _simplex_core(
        ap, bp, cost, mu.weights, nu.weights, flows, adj, allowed=None
    )
    value = float(np.sum(mass * cost))
    dual_value = float(mu.weights @ alpha + nu.weights @ beta)
    if abs(value - dual_value) > DUALITY_TOL * (1.0 + abs(value)):
        raise SolverError(f"duality gap {value - dual_value:.3e} exceeds tolerance")
    return TransportPlan(mass, value, alpha, beta), _Basis(flows, adj, ap, bp)


# ---------------------------------------------------------------------------
# simplex internals
# ---------------------------------------------------------------------------
def _simplex_core(ap, bp, C, a, b, flows, adj, allowed):
    """Pivot to optimality from the given basis; re-absorb exact marginals.

    ap/bp are the perturbed marginals the flows satisfy, a/b the original
    ones used for the final re-absorption.  ``allowed`` optionally
    restricts entering cells (the basis must already lie inside it).
    """
    m, n = C.shape
    basic = np.zeros((m, n), dtype=bool)
    for (i, j) in flows:
        basic[i, j] = True

    bland = False
    stall = 0
    max_iter = max(10_000, 30 * m * n)
    for _ in range(max_iter):
        alpha, beta = _tree_duals(adj, C, m, n)
        reduced = C - alpha[:, None] - beta[None, :]
        reduced[basic] = np.inf
        if allowed is not None:
            reduced[~allowed] = np.inf
        flat = reduced.ravel()
        if bland:
            viol = np.flatnonzero(flat < -OPTIMALITY_TOL)
            if viol.size == 0:
                break
            enter = int(viol[0])
        else:
            enter = int(np.argmin(flat))
            if flat[enter] >= -OPTIMALITY_TOL:
                break
        ei, ej = divmod(enter, n)

        # cycle: entering cell (+), then alternating signs along the tree
        # path from column node ej back to row node ei
        path = _tree_path(adj, m + ej, ei, m)
        theta = np.inf
        leave = None
        for pos in range(0, len(path), 2):
            cell = path[pos]
            f = flows[cell]
            if f < theta - 1e-15:
                theta = f
                leave = cell
            elif f <= theta + 1e-15 and (leave is None or cell < leave):
                theta = min(theta, f)
                leave = cell
        if leave is None:
            raise SolverError("transportation basis lost its cycle structure")

        flows[(ei, ej)] = theta
        basic[ei, ej] = True
        _link(adj, ei, m + ej)
        sign = -1.0
        for cell in path:
            flows[cell] += sign * theta
            sign = -sign
        del flows[leave]
        basic[leave] = False
        _unlink(adj, leave[0], m + leave[1])

        if theta <= 1e-15:
            stall += 1
            if stall > 2 * (m + n) + 4:
                bland = True
        else:
            stall = 0
    else:
        raise SolverError("transportation simplex exceeded its pivot budget")

    mass = _reabsorb(adj, a, b, m, n)
    alpha, beta = _tree_duals(adj, C, m, n)
    return mass, alpha, beta


def _northwest_corner(ap, bp):
    """Initial spanning-tree basis with m + n - 1 cells."""
    m, n = ap.shape[0], bp.shape[0]
    a_rem = ap.copy()
    b_rem = bp.copy()
    flows: dict[tuple[int, int], float] = {}
    adj: list[set[int]] = [set() for _ in range(m + n)]
    i = j = 0
    while True:
        q = min(a_rem[i], b_rem[j])
        flows[(i, j)] = q
        _link(adj, i, m + j)
        a_rem[i] -= q
        b_rem[j] -= q
        if i == m - 1 and j == n - 1:
            break
        if a_rem[i] <= b_rem[j] and i < m - 1:
            i += 1
        elif j < n - 1:
            j += 1
        else:
            i += 1
    return flows, adj


def _link(adj, u, v):
    adj[u].add(v)
    adj[v].add(u)


def _unlink(adj, u, v):
    adj[u].discard(v)
    adj[v].discard(u)


def _tree_duals(adj, C, m, n):
    """Potentials with alpha_i + beta_j = C_ij on basic cells; alpha_0 = 0."""
    alpha = np.empty(m)
    beta = np.empty(n)
    seen = [False] * (m + n)
    alpha[0] = 0.0
    seen[0] = True
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if seen[v]:
                continue
            seen[v] = True
            if u < m:
                beta[v - m] = C[u, v - m] - alpha[u]
            else:
                alpha[v] = C[v, u - m] - beta[u - m]
            stack.append(v)
    if not all(seen):
        raise SolverError("transportation basis is not a spanning tree")
    return alpha, beta


def _tree_path(adj, src, dst, m):
    """Basis cells along the tree path from node src to node dst."""
    parent = {src: None}
    queue = deque([src])
    while queue:
        u = queue.popleft()
        if u == dst:
            break
        for v in adj[u]:
            if v not in parent:
                parent[v] = u
                queue.append(v)
    if dst not in parent:
        raise SolverError("transportation basis is disconnected")
    cells = []
    u = dst
    while parent[u] is not None:
        v = parent[u]
        cells.append((u, v - m) if u < m else (v, u - m))
        u = v
    cells.reverse()
    return cells


def _reabsorb(adj, a, b, m, n):
    """Recompute basic flows from the unperturbed marginals over the tree."""
    degree = [len(adj[u]) for u in range(m + n)]
    residual = np.concatenate([a, b]).astype(float)
    local = [set(s) for s in adj]
    mass = np.zeros((m, n))
    leaves = deque(u for u in range(m + n) if degree[u] == 1)
    pert_total = m * (m + 1) / 2 * _PERTURB
    seen_edges = 0
    while leaves:
        u = leaves.popleft()
        if degree[u] != 1:
            continue
        v = next(iter(local[u]))
        f = residual[u]
        if f < -(pert_total + 1e-9):
            raise SolverError(f"re-absorbed basic flow {f:.3e} is negative")
        i, j = (u, v - m) if u < m else (v, u - m)
        mass[i, j] = max(f, 0.0)
        residual[v] -= f
        residual[u] = 0.0
        local[u].discard(v)
        local[v].discard(u)
        degree[u] -= 1
        degree[v] -= 1
        seen_edges += 1
        if degree[v] == 1:
            leaves.append(v)
    if seen_edges != m + n - 1:
        raise SolverError("re-absorption did not consume the full basis tree")
    return mass
