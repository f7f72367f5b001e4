from __future__ import annotations


class EmaxError(Exception):
    """Base class for every error raised by emaxcli."""


class SingularityError(EmaxError, ZeroDivisionError):
    """A dose sits on the vertical asymptote x = -theta2 (or theta2 + a == 0)."""


class DomainError(EmaxError, ValueError):
    """A parameter or dose lies outside the region where the operation is defined."""


class InputError(EmaxError, ValueError):
    """Malformed user data or configuration."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ShapeError(EmaxError, ValueError):
    """The requested estimate does not exist for this data shape."""


class DegenerateDesignError(EmaxError, ValueError):
    """The design (or theta1) leaves the information matrix singular."""


class NoBracketError(EmaxError, ValueError):
    """Target probability is not attained on the scanned x2 grid."""

    def __init__(self, alpha: float, attainable: tuple[float, float]):
        self.alpha = alpha
        self.attainable = attainable
        lo, hi = attainable
        super().__init__(
            f"alpha={alpha:g} is not attainable on the scanned grid; "
            f"attainable range is [{lo:.6g}, {hi:.6g}]"
        )
