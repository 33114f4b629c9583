"""Discrete probability measures on Euclidean space.

A measure is a weighted point cloud: atoms in R^d plus nonnegative masses
summing to one.  Weights are validated, never silently renormalized; a sum
off by more than ``WEIGHT_TOL`` is an error so that upstream bugs surface
early.  Duplicate atoms are kept as separate atoms: merging would change
transport-plan dimensions and nothing downstream requires it.

All randomness goes through the counter-based Philox generator seeded from
an explicit 64-bit seed (or a ``numpy.random.SeedSequence``), so every
stochastic operation is bit-reproducible across runs.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

WEIGHT_TOL = 1e-9


def _generator(seed) -> np.random.Generator:
    """Philox generator from an int seed or a SeedSequence."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted point cloud in R^d.

    Parameters
    ----------
    points : array_like, shape (n, d)
        Support atoms, one per row.
    weights : array_like, shape (n,)
        Nonnegative masses summing to 1 within ``WEIGHT_TOL``.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValidationError(
                f"points must be a nonempty (n, d) array, got shape {pts.shape}"
            )
        if w.ndim != 1 or w.shape[0] != pts.shape[0]:
            raise ValidationError(
                f"weights must be one per atom: {w.shape} vs {pts.shape[0]} atoms"
            )
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w)):
            raise ValidationError("points and weights must be finite")
        if np.any(w < 0.0):
            raise ValidationError("weights must be nonnegative")
        total = float(w.sum())
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValidationError(
                f"weights must sum to 1 within {WEIGHT_TOL:g}, got {total!r}"
            )
        pts = np.ascontiguousarray(pts)
        w = np.ascontiguousarray(w)
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def n_atoms(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class FactorModelParams:
    """Configuration of the correlated Gaussian factor generator.

    Each sample X in R^dim is built from i.i.d. standard normals
    R_1..R_dim plus one shared normal T per sample:

        X_j = rho * R_j + sqrt(1 - rho^2) * T

    so every component is standard normal and distinct components have
    correlation 1 - rho^2 (small rho means strong dependence).
    """

    dim: int
    rho: float
    n_samples: int
    seed: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError("dim must be a positive integer")
        if not 0.0 <= self.rho <= 1.0:
            raise ValidationError(f"rho must lie in [0, 1], got {self.rho!r}")
        if self.n_samples < 1:
            raise ValidationError("n_samples must be a positive integer")


def empirical_from_samples(samples) -> DiscreteMeasure:
    """Uniform-weight measure on the given sample points, order preserved.

    Duplicate samples stay as separate atoms with weight 1/n each.
    """
    pts = np.asarray(samples, dtype=float)
    if pts.size == 0:
        raise ValidationError("samples must be nonempty")
    if pts.ndim == 1:
        # a flat list of scalars is read as n one-dimensional points
        pts = pts[:, None]
    if pts.ndim != 2:
        raise ValidationError("samples must share a common dimension")
    n = pts.shape[0]
    return DiscreteMeasure(pts, np.full(n, 1.0 / n))


def sample_factor_model(params: FactorModelParams) -> DiscreteMeasure:
    """Draw n_samples atoms from the factor model, uniform weights.

    Deterministic for a fixed seed: the shared factors T are drawn first,
    then the (n, dim) block of idiosyncratic normals.
    """
    rng = _generator(params.seed)
    shared = rng.standard_normal(params.n_samples)
    idio = rng.standard_normal((params.n_samples, params.dim))
    pts = params.rho * idio + np.sqrt(1.0 - params.rho**2) * shared[:, None]
    return empirical_from_samples(pts)


def resample(mu: DiscreteMeasure, n: int, seed) -> DiscreteMeasure:
    """n i.i.d. draws (with replacement) from mu's atom distribution.

    Returns a uniform-weight measure on the drawn atoms; deterministic
    per seed.
    """
    if n < 1:
        raise ValidationError("n must be a positive integer")
    rng = _generator(seed)
    idx = rng.choice(mu.n_atoms, size=n, replace=True, p=mu.weights)
    return empirical_from_samples(mu.points[idx])


# ---------------------------------------------------------------------------
# CSV I/O: header "w,x1,...,xd", one row per atom, '.' decimal separator.
# ---------------------------------------------------------------------------
def save_measure_csv(mu: DiscreteMeasure, path) -> None:
    """Write a measure to CSV with full float precision."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["w"] + [f"x{j + 1}" for j in range(mu.dim)])
        for w, p in zip(mu.weights, mu.points):
            writer.writerow([format(w, ".17g")] + [format(x, ".17g") for x in p])


def load_measure_csv(path) -> DiscreteMeasure:
    """Load a measure written by :func:`save_measure_csv`; validates weights."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty measure file") from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[0] != "w" or header[1:] != [
            f"x{j + 1}" for j in range(len(header) - 1)
        ]:
            raise ValidationError(f"{path}: expected header 'w,x1,...,xd', got {header}")
        dim = len(header) - 1
        weights, points = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 1:
                raise ValidationError(f"{path}:{lineno}: expected {dim + 1} fields")
            try:
                vals = [float(v) for v in row]
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
            weights.append(vals[0])
            points.append(vals[1:])
        if not points:
            raise ValidationError(f"{path}: no atoms")
        try:
            return DiscreteMeasure(np.array(points), np.array(weights))
        except ValidationError as exc:
            raise ValidationError(f"{path}: {exc}") from None
