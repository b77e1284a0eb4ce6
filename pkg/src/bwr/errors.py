class InconsistencyError(RuntimeError):
    """An internal cross-check failed; indicates a bug or an unsound shortcut."""


class PrecisionError(ArithmeticError):
    """The working precision no longer supports the ellipsoid update."""


class EnumerationCapError(RuntimeError):
    """Brute-force enumeration would exceed the configured cap."""
