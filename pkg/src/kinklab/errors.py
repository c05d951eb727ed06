"""Exception types shared by the toolkit."""


class KinklabError(Exception):
    """Base class for toolkit errors."""


class DomainError(KinklabError, ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class IntegrationError(KinklabError):
    """The integrator could not continue (step-size underflow, non-finite state)."""


class IntegrationTimeout(IntegrationError):
    """No terminating event occurred before ``max_time``."""


class TurnedBackError(IntegrationError):
    """The kink turned around (Z changed sign) before reaching the section."""


class AccuracyError(KinklabError):
    """A requested tolerance could not be met."""


class BracketError(KinklabError):
    """A root-finding indicator did not change sign on the bracket."""


class DegenerateError(BracketError):
    """The indicator is degenerate (e.g. concentric curves in the integrable limit)."""
