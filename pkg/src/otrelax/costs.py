"""Transport cost families and closed-form inner maximizations.

Costs are powers of the Euclidean distance, c(x, y) = ||x - y||^k with
k >= 1 ("sqeuclid" is the k = 2 spelling).  The relaxed transport dual
prices each pair (w, y) by the payoff

    payoff(w, y, lam) = sup_x { -ctilde(x, y) - lam * c(x, w) },

a convex, nonincreasing function of lam whose lam-derivative is
-c(x*, w) at the inner maximizer x*.  The supremum is solved in closed
form for the supported cost pairs; no general-purpose inner optimizer
ships, because only these families admit testable exact solutions:

* ctilde = c = squared Euclidean ("quadratic"),
* ctilde = c = Euclidean distance ("order1"),
* ctilde = Euclidean distance, c = distance^k with k > 1 ("metric_power").

The order-1 payoff has a kink at lam = 1 where the maximizer is not
unique (any point of the segment [w, y] attains the sup); the matrix
builder therefore reports one-sided lam-derivatives, which collapse to a
single value everywhere else.  The single-pair functions resolve the tie
to x* = w, matching the lam >= 1 branch.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedCostPair, ValidationError


@dataclass(frozen=True)
class CostSpec:
    """Euclidean-power transport cost ||x - y||^power with power >= 1.

    ``domain_diameter`` optionally records the diameter of the working
    domain; powers above 1 are Lipschitz only on bounded sets, so the
    diameter is required whenever a Lipschitz constant is requested.
    """

    power: float
    domain_diameter: float | None = None

    def __post_init__(self):
        if not np.isfinite(self.power) or self.power < 1.0:
            raise ValidationError(f"cost power must be >= 1, got {self.power!r}")

    @classmethod
    def euclidean(cls, domain_diameter=None) -> "CostSpec":
        return cls(1.0, domain_diameter)

    @classmethod
    def sqeuclidean(cls, domain_diameter=None) -> "CostSpec":
        return cls(2.0, domain_diameter)

    @classmethod
    def parse(cls, text: str) -> "CostSpec":
        """Parse 'euclid', 'sqeuclid', or 'power:K'."""
        text = text.strip()
        if text == "euclid":
            return cls.euclidean()
        if text == "sqeuclid":
            return cls.sqeuclidean()
        if text.startswith("power:"):
            try:
                k = float(text.split(":", 1)[1])
            except ValueError:
                raise ValidationError(f"bad cost spelling {text!r}") from None
            return cls(k)
        raise ValidationError(
            f"bad cost spelling {text!r}: expected euclid, sqeuclid, or power:K"
        )

    def lipschitz_constant(self, diameter: float | None = None) -> float:
        """Lipschitz constant k * diameter^(k-1) on a diameter-bounded set."""
        if self.power == 1.0:
            return 1.0
        d = self.domain_diameter if diameter is None else diameter
        if d is None or not np.isfinite(d):
            raise ValidationError(
                f"power-{self.power:g} cost needs a finite domain diameter"
            )
        return self.power * d ** (self.power - 1.0)


def eval_cost(spec: CostSpec, x, y) -> float:
    """Cost of moving x to y: ||x - y||_2^power.  Zero when x == y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValidationError(f"dimension mismatch: {x.shape} vs {y.shape}")
    d = float(np.linalg.norm(x - y))
    return d * d if spec.power == 2.0 else d**spec.power


def distance_matrix(W: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Pairwise Euclidean distances between the rows of W (m,d) and Y (n,d)."""
    sq = squared_distance_matrix(W, Y)
    return np.sqrt(sq)


def squared_distance_matrix(W: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, clipped at 0 against roundoff."""
    W = np.asarray(W, dtype=float)
    Y = np.asarray(Y, dtype=float)
    sq = (
        np.sum(W * W, axis=1)[:, None]
        + np.sum(Y * Y, axis=1)[None, :]
        - 2.0 * (W @ Y.T)
    )
    return np.maximum(sq, 0.0)


def cost_matrix(spec: CostSpec, W: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Pairwise costs ||w_i - y_j||^power."""
    if spec.power == 2.0:
        return squared_distance_matrix(W, Y)
    d = distance_matrix(W, Y)
    return d if spec.power == 1.0 else d**spec.power


@dataclass(frozen=True, eq=False)
class PayoffValue:
    """Inner maximization result for one pair (w, y) at one lam.

    value = -ctilde(xstar, y) - lam * c(xstar, w), and dvalue_dlambda is
    the envelope derivative -c(xstar, w) <= 0.
    """

    value: float
    dvalue_dlambda: float
    xstar: np.ndarray


def payoff_quadratic(w, y, lam: float) -> PayoffValue:
    """ctilde = c = squared Euclidean.

    The inner optimum is the convex combination x* = (y + lam*w)/(1 + lam)
    and the payoff collapses to -(lam/(1+lam)) * ||w - y||^2.
    """
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_lam(lam)
    xstar = (y + lam * w) / (1.0 + lam)
    sq = float(np.dot(w - y, w - y))
    value = -(lam / (1.0 + lam)) * sq
    dvalue = -sq / (1.0 + lam) ** 2
    return PayoffValue(value, dvalue, xstar)


def payoff_order1(w, y, lam: float) -> PayoffValue:
    """ctilde = c = Euclidean distance.

    payoff = -min(1, lam) * ||w - y||; the maximizer is w for lam >= 1
    (the lam = 1 tie resolves to w) and y for lam < 1.
    """
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_lam(lam)
    d = float(np.linalg.norm(w - y))
    if lam >= 1.0:
        return PayoffValue(-d, 0.0, w.copy())
    return PayoffValue(-lam * d, -d, y.copy())


def payoff_metric_power(w, y, lam: float, k: float) -> PayoffValue:
    """ctilde = Euclidean distance, c = distance^k with k > 1.

    The maximizer lies on the segment [w, y]: straightening any x onto
    the segment weakly decreases both distances.  With D = ||w - y|| and
    t = ||x - w|| the problem is min over t in [0, D] of

        (D - t) + lam * t^k,

    convex in t, interior stationary point t* = (lam*k)^(-1/(k-1)).
    """
    if k <= 1.0:
        raise ValidationError(f"metric-power payoff needs k > 1, got {k!r}")
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_lam(lam)
    D = float(np.linalg.norm(w - y))
    t_opt, f_opt = _metric_power_min(np.array([D]), lam, k)
    t_opt = float(t_opt[0])
    if D > 0.0:
        xstar = w + (t_opt / D) * (y - w)
    else:
        xstar = w.copy()
    return PayoffValue(-float(f_opt[0]), -(t_opt**k), xstar)


def _metric_power_min(D: np.ndarray, lam: float, k: float):
    """Minimize (D - t) + lam*t^k over t in [0, D], elementwise in D."""
    if lam == 0.0:
        return D.copy(), np.zeros_like(D)
    t_int = np.minimum((lam * k) ** (-1.0 / (k - 1.0)), D)
    cands = np.stack([t_int, np.zeros_like(D), D])
    objs = (D[None, :] - cands) + lam * cands**k
    pick = np.argmin(objs, axis=0)
    idx = np.arange(D.shape[0])
    return cands[pick, idx], objs[pick, idx]


def payoff_matrices(ctilde: CostSpec, c: CostSpec, W, Y, lam: float):
    """Payoff values and one-sided lam-derivatives for all pairs.

    Returns (values, dlam_lo, dlam_hi), each (m, n).  The two derivative
    matrices differ only at the order-1 kink lam = 1, where the inner
    maximizer is non-unique and the lam-subdifferential per pair is the
    interval [-d(w, y), 0].
    """
    _check_lam(lam)
    kind = closed_form_kind(ctilde, c)
    if kind == "quadratic":
        sq = squared_distance_matrix(W, Y)
        values = -(lam / (1.0 + lam)) * sq
        dlam = -sq / (1.0 + lam) ** 2
        return values, dlam, dlam
    dist = distance_matrix(W, Y)
    if kind == "order1":
        if lam > 1.0:
            zero = np.zeros_like(dist)
            return -dist, zero, zero
        if lam < 1.0:
            return -lam * dist, -dist, -dist
        return -dist, -dist, np.zeros_like(dist)
    # metric_power: same interior t* for every pair, clipped per pair
    flat = dist.ravel()
    t_opt, f_opt = _metric_power_min(flat, lam, c.power)
    values = -f_opt.reshape(dist.shape)
    dlam = -(t_opt**c.power).reshape(dist.shape)
    return values, dlam, dlam


def inner_argmax(ctilde: CostSpec, c: CostSpec, w, y, lam: float) -> np.ndarray:
    """Maximizer x* of -ctilde(x, y) - lam*c(x, w); lam = inf pins x* = w."""
    if np.isinf(lam):
        return np.asarray(w, dtype=float).copy()
    kind = closed_form_kind(ctilde, c)
    if kind == "quadratic":
        return payoff_quadratic(w, y, lam).xstar
    if kind == "order1":
        return payoff_order1(w, y, lam).xstar
    return payoff_metric_power(w, y, lam, c.power).xstar


def closed_form_kind(ctilde: CostSpec, c: CostSpec) -> str:
    """Name of the closed-form family for this cost pair, or raise."""
    if ctilde.power == 2.0 and c.power == 2.0:
        return "quadratic"
    if ctilde.power == 1.0 and c.power == 1.0:
        return "order1"
    if ctilde.power == 1.0 and c.power > 1.0:
        return "metric_power"
    raise UnsupportedCostPair(
        f"no closed form for this cost pair (ctilde power {ctilde.power:g}, "
        f"c power {c.power:g})"
    )


def payoff_lipschitz(
    c: CostSpec, ctilde: CostSpec, lam: float, diameter: float
) -> float:
    """Lipschitz constant of the pair payoff in (w, y).

    Uses the sum lam * L(c) + L(ctilde), which dominates the max of the
    per-argument constants and therefore yields valid, if slightly loose,
    deviation bounds.
    """
    _check_lam(lam)
    return lam * c.lipschitz_constant(diameter) + ctilde.lipschitz_constant(diameter)


def _check_lam(lam: float) -> None:
    if not lam >= 0.0:
        raise ValidationError(f"lambda must be >= 0, got {lam!r}")
