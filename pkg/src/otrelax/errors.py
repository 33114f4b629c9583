"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid input: malformed measure, bad flag value, shape mismatch."""


class UnsupportedCostPair(ValidationError):
    """No closed-form inner maximization exists for this (ctilde, c) pair."""


class SolverError(RuntimeError):
    """Numerical failure: non-convergence, broken certificates, cycling."""
