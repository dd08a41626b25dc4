"""Exception hierarchy shared by the library modules."""


class BranchflowError(Exception):
    """Base class for all library errors."""


class ValidationError(BranchflowError):
    """An input violates a documented precondition or invariant.

    The message names the offending field/argument.
    """


class SolverError(BranchflowError):
    """A solver failed to reach its tolerance within budget."""


class NonConvergence(SolverError):
    """Inner iteration exceeded its budget (tolerance likely too tight)."""


class BracketFailure(SolverError):
    """The outer radius search ran off the edge of its bracket.

    Usually signals inconsistent prefactor/parameter choices: the
    radius objective should blow up at both ends of the bracket.
    """


class KirchhoffViolation(ValidationError):
    """A polyhedral measure does not balance mass at its vertices."""
