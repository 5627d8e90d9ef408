"""Exception types shared across modules."""


class SpecError(ValueError):
    """A measure or run specification is malformed or out of range."""


class DivergenceError(ArithmeticError):
    """A weighted tail integral is infinite (heavy tail)."""

    def __init__(self, message="nu-tail infinite", x=None, side=None):
        super().__init__(message)
        self.x = x
        self.side = side


class DensityUnavailableError(ValueError):
    """The measure has no Lebesgue density (empirical or atomic)."""


class GradientRestrictionError(ValueError):
    """A test function violates the coordinate-gradient bound required at beta = 0."""


class FitError(RuntimeError):
    """An envelope or constant could not be fitted."""
