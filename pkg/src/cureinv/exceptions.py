"""Exception types raised by the estimation pipeline."""


class CureModelError(Exception):
    """Base class for all errors raised by :mod:`cureinv`."""


class CsvFormatError(CureModelError, ValueError):
    """Malformed survival CSV; the message names the offending row and column."""


class EmptyNeighborhood(CureModelError, ValueError):
    """All kernel weights vanish at a covariate value (bandwidth too small)."""

    def __init__(self, x, index=None):
        self.x = float(x)
        self.index = index
        where = f"x={self.x:.6g}" if index is None else f"subject {index} (x={self.x:.6g})"
        super().__init__(f"no observation within the kernel bandwidth of {where}")


class NoFeasibleBandwidth(CureModelError, ValueError):
    """Every cross-validation candidate left some observation without neighbours."""


class RiskSetZero(CureModelError, ArithmeticError):
    """A censoring jump occurred where the weighted risk set is empty."""


class SeparationError(CureModelError, ValueError):
    """The event indicator takes a single value; the logistic start is undefined."""


class NewtonDivergence(CureModelError, ArithmeticError):
    """Damped Newton iterations did not converge."""


class BootstrapUnstable(CureModelError, RuntimeError):
    """More than half of the bootstrap refits failed."""
