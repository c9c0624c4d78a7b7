"""Exception hierarchy shared by every module of the package."""


class FracLapError(Exception):
    """Base class for all errors raised by :mod:`fraclap`."""


class TailDivergent(FracLapError):
    """The weighted tail integral of a function is infinite."""


class SingularPoint(FracLapError):
    """The principal value may not exist at the requested point."""


class QuadratureNotConverged(FracLapError):
    def __init__(self, value, error, levels):
        self.value = value
        self.error = error
        self.levels = levels
        super().__init__(
            f"quadrature did not converge after {levels} refinements "
            f"(value={value:.6e}, error={error:.3e})"
        )


class InvalidBeta(FracLapError):
    """Barrier exponent below the admissibility threshold."""


class SupportTooClose(FracLapError):
    """Evaluation point too close to the support of a jump perturbation."""


class CollarMismatch(FracLapError):
    """Grid function disagrees with the exterior datum on the collar."""


class NotConverged(FracLapError):
    def __init__(self, iterations, final_grad_norm):
        self.iterations = iterations
        self.final_grad_norm = final_grad_norm
        super().__init__(
            f"solver stopped after {iterations} iterations with residual "
            f"{final_grad_norm:.3e}"
        )


class NonConvex(FracLapError):
    """Zero-order coefficient is positive somewhere, energy not convex."""


class PreconditionViolated(FracLapError):
    def __init__(self, hypothesis, detail=""):
        self.hypothesis = hypothesis
        msg = f"precondition violated: {hypothesis}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class RayExitsGrid(FracLapError):
    """A sampling ray leaves the region covered by the grid."""


class AlphaSearchFailed(FracLapError):
    """No admissible barrier height found within the doubling budget."""


class InsufficientPoints(FracLapError):
    """Too few nodes in the boundary band to fit an exponent."""


class ConfigInvalid(FracLapError):
    def __init__(self, field, detail):
        self.field = field
        super().__init__(f"{field}: {detail}")


class CheckFailed(FracLapError):
    """At least one verification check reported failure; ``result`` holds
    the run whose artifacts were written."""

    def __init__(self, message, result=None):
        self.result = result
        super().__init__(message)
