"""Exception hierarchy shared by all fastjl modules.

The CLI maps these onto stable exit codes: usage errors -> 1,
contract/precondition/privacy errors -> 2, resource and IO errors -> 3.
"""


class FastJlError(Exception):
    """Base class for all library errors."""


class DimensionError(FastJlError):
    """Shapes or lengths of the inputs do not line up."""


class ContractError(FastJlError):
    """An input violates a documented precondition (e.g. asymmetric matrix)."""


class ParameterRangeError(FastJlError):
    """A parameter is outside its admissible range."""


class ResourceError(FastJlError):
    """The request would exceed an enumeration or memory guard."""


class SingularMatrixError(FastJlError):
    """A linear system is numerically rank deficient.

    Carries the condition estimate that triggered the rejection.
    """

    def __init__(self, message, condition_estimate=None):
        super().__init__(message)
        self.condition_estimate = condition_estimate


class PrivacyPreconditionError(FastJlError):
    """The spectral floor required for private publication does not hold."""

    def __init__(self, message, sigma_min=None, threshold=None):
        super().__init__(message)
        self.sigma_min = sigma_min
        self.threshold = threshold
