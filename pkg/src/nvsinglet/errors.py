"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """An argument violates a documented precondition."""


class NumericalError(RuntimeError):
    """A numerical routine failed or produced an unusable result."""


class NonUniqueSteadyStateError(NumericalError):
    """The generator has more than one (or no) zero mode."""

    def __init__(self, count, message=None):
        self.count = count
        super().__init__(message or f"expected exactly one zero mode, found {count}")


class IntegrationError(NumericalError):
    """Time integration drifted outside trace or positivity tolerances."""
