"""
Exception hierarchy for the verification engine
"""


class VerifierError(Exception):
    """
    Base class for every error raised by the verifier
    """


class ParseError(VerifierError):
    """
    Syntax error in a program or task file, with a source position
    """

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"{line}:{column}: {message}")


class TaskError(VerifierError):
    """
    Malformed verification task (missing section, bad bound)
    """


class SolverError(VerifierError):
    """
    SMT solver protocol failure
    """


class SolverUnknown(SolverError):
    """
    The solver answered unknown or ran out of time
    """


class BudgetExhausted(VerifierError):
    """
    A time, iteration or trace budget ran out
    """

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


class ContractError(VerifierError):
    """
    An operation was called outside its precondition
    """


class InvariantViolation(VerifierError):
    """
    A runtime invariant check failed
    """
