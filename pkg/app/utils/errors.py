"""Exception hierarchy shared by the algebra engines and the CLI."""


class KDRError(Exception):
    """Base exception for all kdr errors."""

    pass


# --- exact algebra ---
class RingMismatchError(KDRError):
    """Raised when operands live in different polynomial rings."""

    pass


class InexactDivisionError(KDRError):
    """Raised when exact division leaves a remainder or the divisor is zero."""

    pass


class BrokenComplexError(KDRError):
    """Raised when an image is not contained in the kernel it should map into."""

    pass


class MinorSizeError(KDRError):
    """Raised when a requested minor size exceeds the Jacobian shape."""

    pass


# --- Koszul–De Rham algebra and charts ---
class ChartMismatchError(KDRError):
    """Raised when elements of different chart algebras are combined."""

    pass


class ChartDefinitionError(KDRError):
    """Raised for malformed charts (duplicate names, polynomials outside the ring)."""

    pass


class MorphismError(KDRError):
    """Raised when w*(f) = h f' fails or a morphism chain does not compose."""

    pass


class NotEliminableError(KDRError):
    """Raised when no relation can be solved for a fiber variable."""

    pass


# --- cohomology ---
class WellDefinednessError(KDRError):
    """Raised when an induced map does not respect the image submodule."""

    pass


class TransitivityError(KDRError):
    """Raised in strict mode when h_K^K'' != h_K^K' h_K'^K'' for some chain."""

    pass


class FiltrationError(KDRError):
    """Raised when a differential does not preserve a truncated slice."""

    pass


class NotInNerveError(KDRError):
    """Raised when an index set outside the nerve is requested."""

    pass


# --- input ---
class SpecError(KDRError):
    """Raised for unreadable or invalid chart/atlas/job files."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        location = f" (line {line}, column {column})" if line else ""
        super().__init__(f"{message}{location}")
