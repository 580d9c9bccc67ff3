"""Exception types shared across the package."""


class ValleycrossError(Exception):
    """Base class for all package errors."""


class ModelError(ValleycrossError):
    """Raised when a model document cannot be parsed or violates a model invariant."""


class AssumptionError(ValleycrossError):
    """Raised when a structural assumption of the theory is violated.

    Examples: integer mutation-scale exponent, zero self-competition,
    a mutation kernel with mass on the diagonal, or an invasion fitness
    indistinguishable from zero.
    """


class EscRejection(ValleycrossError):
    """Raised when a resident set fails the stability certification.

    The ``reason`` attribute is one of ``"empty-resident"``,
    ``"no-coexistence"`` or ``"fit-trait-inside-neighbourhood"``.
    """

    def __init__(self, reason, detail=""):
        self.reason = reason
        super().__init__(f"{reason}: {detail}" if detail else reason)


class SimulationError(ValleycrossError):
    """Raised on simulator failures such as rate overflow or ODE blow-up."""
