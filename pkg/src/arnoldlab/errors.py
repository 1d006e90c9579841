"""Exception hierarchy shared by all modules."""


class ArnoldLabError(Exception):
    """Base class for every error raised by the package."""


class DomainError(ArnoldLabError, ValueError):
    """An argument lies outside the domain of an operation."""


class InsufficientDepthError(ArnoldLabError, ValueError):
    """The continued fraction does not carry enough quotients."""


class PrecisionError(ArnoldLabError):
    """The requested precision cannot certify the result; raise ``bits``."""


class IndeterminateError(PrecisionError):
    """A ternary comparison came out Indeterminate."""


class SingularEvaluationError(ArnoldLabError):
    """A roof evaluation came within the exclusion radius of the singularity."""

    def __init__(self, distance: float, index=None):
        self.distance = distance
        self.index = index
        where = "" if index is None else f" at orbit index {index}"
        super().__init__(f"point{where} lies {distance:.3e} from the singularity")


class PreconditionError(ArnoldLabError, ValueError):
    """Inputs fail a stated precondition of an analysis."""


class BudgetError(ArnoldLabError):
    """Rejection sampling ran out of proposals."""

    def __init__(self, message: str, acceptance_rate: float):
        self.acceptance_rate = acceptance_rate
        super().__init__(f"{message} (acceptance rate {acceptance_rate:.3g})")
