"""Exception types raised by the toolkit."""


class InvalidInputError(ValueError):
    """Argument violates an operation precondition."""


class PoleEvaluationError(ZeroDivisionError):
    """Transfer function evaluated at (or numerically on) a pole."""


class ConfigError(ValueError):
    """A feedback configuration breaks one or more structural constraints.

    ``violations`` holds one human-readable message per broken constraint.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class DegeneracyError(ArithmeticError):
    """A matrix that must be inverted is numerically singular."""


class DivergenceError(RuntimeError):
    """Simulated trajectory left the admissible ball."""
