"""Exception hierarchy shared by all ionmux modules."""


class IonmuxError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(IonmuxError):
    """A physical or numerical parameter is out of its allowed range."""


class ProtocolError(IonmuxError):
    """A pulse program or protocol spec is ill-formed (overlapping
    primitives, mode collisions, unbalanced shelving, ...)."""


class AnalysisError(IonmuxError):
    """A numerical analysis failed (non-converging chain, population
    conservation violated beyond tolerance)."""


class BudgetError(IonmuxError):
    """A requested computation exceeds a hard enumeration budget."""


class ConfigError(IonmuxError):
    """A run configuration is malformed: unknown key, missing unit,
    or out-of-range value."""
