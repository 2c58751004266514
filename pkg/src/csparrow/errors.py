"""Exception hierarchy shared by every module of the toolkit."""


class SatToolkitError(ValueError):
    """Base class for all errors raised by csparrow."""


# formula / DIMACS
class DimacsError(SatToolkitError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MissingHeader(DimacsError):
    pass


class ClauseCountMismatch(DimacsError):
    pass


class VarOutOfRange(DimacsError):
    pass


class EmptyClause(DimacsError):
    pass


class TautologicalClause(DimacsError):
    pass


class DuplicateLiteral(DimacsError):
    pass


class ClauseTooWide(DimacsError):
    pass


class LengthMismatch(SatToolkitError):
    pass


# flip engine / solvers
class TooManyVariables(SatToolkitError):
    pass


class NoCandidates(SatToolkitError):
    pass


class InvalidParams(SatToolkitError):
    pass


# markov analysis
class EpsilonRequired(SatToolkitError):
    pass


class NotConverged(SatToolkitError):
    pass


class EmptyClass(SatToolkitError):
    pass


class DegenerateChain(SatToolkitError):
    pass


class InvalidProbabilities(SatToolkitError):
    pass


# experiments
class InvalidConfig(SatToolkitError):
    pass


class UnsatInstance(SatToolkitError):
    pass
