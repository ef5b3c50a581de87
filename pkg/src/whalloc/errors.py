"""Exception hierarchy.

Validation errors carry the offending index or id so that callers (and the
CLI) can point at the bad input. The CLI maps ``ValidationError`` to exit
code 1 and ``ParseError`` to exit code 2.
"""


class WhallocError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(WhallocError, ValueError):
    """An input violates a domain invariant."""

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where
        self.violations = [self]


class ShapeMismatch(ValidationError):
    pass


class NegativeQuantity(ValidationError):
    """A quantity or capacity is negative (or a PO quantity is below 1)."""


class DuplicateSku(ValidationError):
    def __init__(self, sku_id, where=None):
        super().__init__(f"duplicate sku id {sku_id!r}", where=where)
        self.sku_id = sku_id

    def __str__(self):
        return f"DuplicateSku({self.sku_id!r})"


class InvalidPenalty(ValidationError):
    pass


class InvalidProbabilities(ValidationError):
    pass


class EmptyCorpus(ValidationError):
    pass


class ScenarioGap(ValidationError):
    """A purchase order refers to a (business unit, period) with no capacities."""


class NoEvents(ValidationError):
    pass


class InstanceTooLarge(WhallocError):
    """Brute-force oracle refused an instance outside its size bound."""


class ParseError(WhallocError):
    def __init__(self, path, line, reason):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = path
        self.line = line
        self.reason = reason


class DegenerateLabels(UserWarning):
    """Training labels contain a single class; a constant predictor was fitted."""
