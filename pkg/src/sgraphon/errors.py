"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class SGraphonError(Exception):
    exit_code = 1


class InvalidInput(SGraphonError, ValueError):
    """Malformed or out-of-contract input (bad file, bad matrix, bad flag)."""

    exit_code = 2


class EmptyEdgeSet(SGraphonError, ValueError):
    """A graph without edges has no normalized adjacency matrix."""

    exit_code = 3


class ResolutionMismatch(SGraphonError, ValueError):
    exit_code = 3


class DimensionMismatch(SGraphonError, ValueError):
    exit_code = 3


class EmptyCloud(SGraphonError, ValueError):
    exit_code = 3


class HardModeInfeasible(SGraphonError, ValueError):
    exit_code = 3


class InfeasibleSpec(SGraphonError, ValueError):
    exit_code = 3


class MismatchedSequences(SGraphonError, ValueError):
    exit_code = 3


class NonConvergence(SGraphonError, RuntimeError):
    exit_code = 4


class ResolutionGuard(SGraphonError, RuntimeError):
    """Common resolution would exceed the memory guard (``MAX_RESOLUTION``)."""

    exit_code = 4


class VerificationFailure(SGraphonError, AssertionError):
    exit_code = 5
