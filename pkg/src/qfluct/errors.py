"""Exception hierarchy shared by all modules."""


class QFluctError(Exception):
    """Base class for package errors."""


class DomainError(QFluctError, ValueError):
    """An argument lies outside the domain of an operation."""


class ResourceError(QFluctError, MemoryError):
    """A dense representation would exceed the configured size cap."""


class NumericalError(QFluctError, ArithmeticError):
    """A quantity that must be real (or hermitian) is not, within tolerance."""


class ConfigError(QFluctError, ValueError):
    """Invalid model configuration or failed precondition certificate."""


class LocalityViolation(QFluctError):
    """The generator maps span(chi) outside itself.

    Attributes
    ----------
    residual : float
        Operator norm of the part of ``L[x_i]`` orthogonal to span(chi).
    index : int
        Index ``i`` of the offending observable.
    """

    def __init__(self, residual, index, site=None):
        self.residual = float(residual)
        self.index = int(index)
        self.site = site
        msg = f"L[x_{index}] leaves span(chi): residual norm {self.residual:.3e}"
        if site is not None:
            msg += f" (site {site})"
        super().__init__(msg)
