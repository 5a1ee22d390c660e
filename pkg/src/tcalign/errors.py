"""Exception hierarchy shared by all tcalign modules."""


class TcaError(Exception):
    """Base class for all tcalign errors."""


class InvalidInput(TcaError):
    """Malformed argument: wrong shape, non-finite entries, mismatched dimensions."""


class InvalidConfig(TcaError):
    """Adaptation configuration violates a documented constraint."""


class InsufficientSamples(TcaError):
    """Fewer rows than the statistic requires (covariance needs n >= 2)."""


class DegenerateLabels(TcaError):
    """Training labels contain fewer than two distinct classes."""


class NumericalFailure(TcaError):
    """An iterative numerical routine failed to converge."""


class SingularMatrix(NumericalFailure):
    """A matrix power with negative exponent hit a non-positive eigenvalue."""


class DivergenceError(NumericalFailure):
    """Gradient descent produced a non-finite objective.

    Carries the last finite iterate and the objective trace recorded up to
    the failure, so callers can inspect how the blow-up unfolded.
    """

    def __init__(self, message, last_iterate=None, objective_values=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.objective_values = objective_values if objective_values is not None else []


class ParseError(TcaError):
    """A persisted artifact (embedding file, label file, head JSON) is malformed.

    ``context`` names the byte offset or JSON field that failed validation.
    """

    def __init__(self, message, context=None):
        super().__init__(message if context is None else f"{message} ({context})")
        self.context = context
