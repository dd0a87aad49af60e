"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operands or layers whose dimensions do not compose."""


class FormatError(ValueError):
    """A model file, dataset file, or report that does not parse.

    Carries enough context (path, line or row number) in the message to
    locate the offending input.
    """


class CapacityError(RuntimeError):
    """The classification head was asked to grow beyond its class cap."""
