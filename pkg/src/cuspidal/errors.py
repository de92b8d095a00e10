"""Exception types shared by the numerical layers and mapped to CLI exit codes."""


class CuspidalError(Exception):
    """Base class for every error raised by the package."""


class ScenarioError(CuspidalError, ValueError):
    """Malformed or inconsistent scenario / input data (exit code 2)."""


class ConvergenceError(CuspidalError, RuntimeError):
    """A numerical procedure failed its own accuracy check (exit code 3)."""


class InvariantViolation(CuspidalError, AssertionError):
    """A structural identity failed beyond tolerance (exit code 4)."""

    def __init__(self, name, detail=""):
        self.name = name
        self.detail = detail
        super().__init__(f"{name}: {detail}" if detail else name)


class BranchError(CuspidalError, ValueError):
    """A spectral point lies outside the region where the requested branch exists."""


class PoleProximity(CuspidalError, ArithmeticError):
    """The matching system is singular to tolerance: the point is at (or near) a pole.

    ``direction`` holds the right singular vector of the smallest singular value,
    i.e. the cavity coefficient combination that solves the homogeneous problem.
    """

    def __init__(self, message, s=None, direction=None, sigma_min=None):
        super().__init__(message)
        self.s = s
        self.direction = direction
        self.sigma_min = sigma_min


class CavitySingular(CuspidalError, ArithmeticError):
    """Y(0) is near-singular, so the DtN map does not exist at this lambda."""
