"""Exception hierarchy shared by all modules."""


class JmlsRealError(Exception):
    """Base class for all library errors."""


class ValidationError(JmlsRealError):
    """Malformed model, series or configuration data."""


class RankDeficient(JmlsRealError):
    """Requested rank exceeds the numeric rank of a Hankel block."""


class SingularSelection(JmlsRealError):
    """The selected Hankel minor is numerically singular."""


class UnstableModel(JmlsRealError):
    """Stability check failed; stationary quantities are undefined."""


class InnovationNotFullRank(JmlsRealError):
    """Innovation covariance is not invertible on the required range."""


class NoConvergence(JmlsRealError):
    """Fixed-point iteration hit its iteration cap."""


class InsufficientData(JmlsRealError):
    """Time series too short for the requested estimator."""


class MissingCovariance(JmlsRealError):
    """Covariance table lacks an entry the pipeline needs."""


class SingularGram(JmlsRealError):
    """Regression Gram matrix is not invertible at tolerance."""


class NotIsomorphic(JmlsRealError):
    """No isomorphism exists between the given systems."""


class NotMinimal(JmlsRealError):
    """Operation requires minimal (reachable and observable) systems."""


class Reducible(JmlsRealError):
    """Markov chain support graph is not irreducible."""


class InconsistentAlphabet(JmlsRealError):
    """Alphabet or index structure does not match between objects."""


class OutOfRange(JmlsRealError):
    """Time index outside the valid range of a series."""
