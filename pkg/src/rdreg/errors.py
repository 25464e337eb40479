"""Exception types shared across the toolkit."""


class ContractError(ValueError):
    """An input violates a documented precondition (shape, symmetry, range)."""


class ResonantSystemError(ArithmeticError):
    """A linear solve hit a (numerically) resonant spectrum."""


class SynthesisError(RuntimeError):
    """Gain design failed (uncontrollable/unobservable pair or bad targets)."""


class DegenerateDisturbanceError(ValueError):
    """The harmonic disturbance has zero amplitude in the observed channel."""


class SingularTransformError(ValueError):
    """The canonical change of basis is not invertible (unobservable pair)."""


class ConfigError(ValueError):
    """Scenario configuration failed to parse or validate."""

    def __init__(self, message, line=None, field=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field '{field}'")
        prefix = " (".join([", ".join(loc)]) if loc else ""
        super().__init__(f"{', '.join(loc)}: {message}" if loc else message)
        self.line = line
        self.field = field
