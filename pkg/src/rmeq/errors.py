"""Exception hierarchy shared across the package.

The CLI maps ConfigError to exit code 2 and NumericError (and subclasses)
to exit code 3; everything else is a bug.
"""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid configuration: bad shapes, unknown keys, out-of-range values."""


class NumericError(RuntimeError):
    """A numerical operation could not be completed as specified."""


class SingularPointError(NumericError):
    """Evaluation point coincides with the spectrum."""


class DegeneratePivotError(NumericError):
    """Rank-one update pivot too close to zero."""


class DivergenceError(NumericError):
    """Series evaluation requested outside its region of convergence."""


class FixedPointError(NumericError):
    """Base class for fixed-point solver failures."""


class NoConvergenceError(FixedPointError):
    """Damped iteration did not reach tolerance.

    Carries the residual trajectory for diagnosis.
    """

    def __init__(self, message: str, trajectory=None):
        super().__init__(message)
        self.trajectory = list(trajectory) if trajectory is not None else []


class PoleError(FixedPointError):
    """Some 1 - lambda_i denominator got too close to zero."""


class BranchError(FixedPointError):
    """Converged to a solution violating the half-plane sign convention."""


class OnSupportError(NumericError):
    """Closed-form transform requested on (or too close to) the support."""


class RejectionRateError(NumericError):
    """Rejection sampling discarded more than the allowed fraction of draws."""


class SignConventionError(NumericError):
    """Imaginary part changed sign where a constant sign is required."""


class NodeError(NumericError):
    """Failure at one node of a grid or contour; carries the node index."""

    def __init__(self, index: int, z: complex, cause: Exception):
        super().__init__(f"node {index} at z={z!r}: {cause}")
        self.index = index
        self.z = z
        self.cause = cause
