"""Exception hierarchy shared by the package and mapped to CLI exit codes."""


class NLDGraphError(Exception):
    exit_code = 1


class GraphParseError(NLDGraphError, ValueError):
    """Malformed graph description; carries the 1-based line number."""

    exit_code = 3

    def __init__(self, message, line=None, kind="syntax"):
        self.line = line
        self.kind = kind
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class ValidationError(NLDGraphError, ValueError):
    """Parameters outside the admissible range (checked before any compute)."""

    exit_code = 2


class SolverError(NLDGraphError, RuntimeError):
    exit_code = 4

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class MaxIterationsError(SolverError):
    pass


class SingularJacobianError(SolverError):
    pass


class ConvergedToZeroError(SolverError):
    pass


class BranchLostError(SolverError):
    pass


class SpectrumError(SolverError):
    pass


class InvariantViolation(NLDGraphError, AssertionError):
    exit_code = 5
