"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class ContractError(ValueError):
    """A call violated an operation's precondition."""


class SpecError(ValueError):
    """A layer or stack specification is invalid.

    ``violations`` lists every failed constraint, one message each.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class SpecParseError(ValueError):
    """Stack notation could not be parsed; ``position`` is a 0-based offset."""

    def __init__(self, message, text, position):
        self.text = text
        self.position = position
        super().__init__(f"{message} at position {position} in {text!r}")


class FormatError(ValueError):
    """A tensor or checkpoint file is malformed."""


class NumericError(RuntimeError):
    """A non-finite value appeared during training."""
