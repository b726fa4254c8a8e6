"""Exception hierarchy shared across the package."""


class MckeanLabError(Exception):
    """Base class for all package errors."""


class AssumptionError(MckeanLabError, ValueError):
    """A potential violates one of the standing assumptions.

    ``assumption`` names the violated condition, e.g. ``"(V-2)"``.
    """

    assumption = ""

    def __init__(self, message: str, assumption: str | None = None):
        if assumption is not None:
            self.assumption = assumption
        super().__init__(f"{self.assumption} {message}".strip())


class OddCoefficient(AssumptionError):
    pass


class DegreeTooLow(AssumptionError):
    pass


class WrongCriticalPoints(AssumptionError):
    assumption = "(V-2)"


class NonconvexSecondDerivative(AssumptionError):
    pass


class GrowthBoundFails(AssumptionError):
    assumption = "(V-3)"


class NonzeroAtOrigin(AssumptionError):
    pass


class NotConvex(AssumptionError):
    assumption = "(F-2)"


class MomentVectorTooShort(MckeanLabError, ValueError):
    pass


class StabilityViolation(MckeanLabError):
    pass


class PositivityLoss(MckeanLabError):
    pass


class NonmonotoneEnergy(MckeanLabError):
    pass


class DegenerateNormalization(MckeanLabError):
    pass


class NoAdmissibleRoot(MckeanLabError):
    pass


class NumericalBlowup(MckeanLabError):
    pass


class GrowthPreconditionFails(MckeanLabError, ValueError):
    pass


class BranchLost(MckeanLabError):
    def __init__(self, branch: str, eps: float):
        self.branch = branch
        self.eps = eps
        super().__init__(f"branch {branch!r} lost at eps={eps:g}")


class NoMatch(MckeanLabError):
    pass


class HypothesisFailed(MckeanLabError):
    def __init__(self, predicate: str):
        self.predicate = predicate
        super().__init__(f"hypothesis check failed: {predicate}")


class ParseError(MckeanLabError):
    def __init__(self, line: int | None, message: str):
        self.line = line
        self.message = message
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class ValidationError(MckeanLabError):
    def __init__(self, field: str, message: str):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")
