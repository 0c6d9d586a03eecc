"""Exception hierarchy shared by all nlobs modules."""


class NlobsError(Exception):
    """Base class for all toolkit errors."""


class NonSquare(NlobsError):
    """Matrix operation requires a square matrix."""


class AsymmetricBeyondTol(NlobsError):
    """Matrix is not symmetric within the requested tolerance."""


class RankDeficient(NlobsError):
    """Output map does not have full row rank."""


class ConvergenceError(NlobsError):
    """Iterative kernel failed to converge (should not happen at desk scale)."""


class DimensionMismatch(NlobsError):
    """Vector/matrix dimensions are inconsistent."""


class UnknownBuiltin(NlobsError):
    """No builtin system registered under this name."""


class NotDifferentiableAtPoint(NlobsError):
    """Nonlinearity has no Jacobian at the requested point."""


class ParseError(NlobsError):
    """Input text is not valid JSON."""


class SchemaError(NlobsError):
    """JSON is valid but does not match the system schema.

    `field` carries the path of the offending entry, e.g. "phi.terms[2].exps".
    """

    def __init__(self, field, message=None):
        self.field = field
        super().__init__(message or f"schema violation at {field!r}")


class EmptyRegion(NlobsError):
    """Sampling produced no usable points."""


class PreconditionViolated(NlobsError):
    """Caller-supplied arguments violate a documented precondition."""


class InfeasibleSamples(NlobsError):
    """No (beta, gamma) satisfies every sampled constraint."""


class Unbounded(NlobsError):
    """The inner-bound LP has no finite minimum for the given rho."""


class StructurallyInfeasible(NlobsError):
    """rho = 0 with beta >= 0: no design exists for any alpha."""


class NoFeasibleAlpha(NlobsError):
    """No alpha in the search policy yields a non-empty feasibility window."""


class NotPositiveDefiniteP(NlobsError):
    """Supplied P matrix is not symmetric positive definite."""


class NotPositiveDefinite(NlobsError):
    """Matrix expected to be positive definite is not."""


class EquationResidualTooLarge(NlobsError):
    """Supplied (P, Q) do not satisfy the Lyapunov equation within tolerance."""


class NewtonDivergence(NlobsError):
    """Damped Newton iteration failed to converge in an implicit step."""


class NonFiniteState(NlobsError):
    """Integration produced NaN or infinity."""


class EmptyTrace(NlobsError):
    """Metric computation requires a non-empty trace."""
