"""Exception hierarchy.

Every error carries a ``category`` that the command line maps to its
exit status.
"""


class SemictrlError(Exception):
    """Base class for every error raised by the toolkit."""

    category = "error"


class ConfigError(SemictrlError):
    """A scenario file violates the schema.

    ``path`` is the dotted field path of the offending entry.
    """

    category = "config"

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class SolverError(SemictrlError):
    category = "solver"


class BlowUp(SolverError):
    """An iterate left the ball of radius ``blowup_threshold``."""


class NoConvergence(SolverError):
    """Picard iteration exhausted its iteration and halving budget."""


class SemigroupError(SolverError):
    """The generator could not be exponentiated (non-finite entries)."""


class Stall(SolverError):
    """Steering residual failed to decrease on consecutive corrections."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class HypothesisError(SemictrlError):
    category = "hypothesis"


class SingularGramian(HypothesisError):
    """The controllability Gramian is not positive definite."""


class DegenerateFit(HypothesisError):
    """All Taylor remainders vanish, so no growth exponent can be fitted."""


class HypothesisFailed(HypothesisError):
    """The integral inequality assumed by Gronwall's lemma does not hold."""


class BoundViolation(HypothesisError):
    """A measured quantity exceeded its theoretical bound."""

    def __init__(self, message, measured=None, bound=None):
        super().__init__(message)
        self.measured = measured
        self.bound = bound
