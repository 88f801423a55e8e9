"""Exception types raised across the package."""


class DyqnError(Exception):
    """Base class for every error raised by this package."""


class DuplicateEvidence(DyqnError, ValueError):
    pass


class UnknownEvidence(DyqnError, ValueError):
    pass


class EmptyDecisionBag(DyqnError, ValueError):
    pass


class DatasetFormatError(DyqnError, ValueError):
    """Raised by the dataset loader; the message carries a line number when one is known."""


class UnknownVignette(DyqnError, KeyError):
    pass


class EpisodeFinished(DyqnError, RuntimeError):
    pass


class ForcedTriageViolation(DyqnError, RuntimeError):
    pass


class ShapeError(DyqnError, ValueError):
    pass


class NumericalError(DyqnError, FloatingPointError):
    pass


class EmptyRestriction(DyqnError, ValueError):
    pass


class DomainError(DyqnError, ValueError):
    pass


class EmptyMemory(DyqnError, IndexError):
    pass


class NoQualifyingVignettes(DyqnError, ValueError):
    pass


class EmptyFit(DyqnError, ValueError):
    pass


class SingleClassError(DyqnError, ValueError):
    pass


class NotFitted(DyqnError, RuntimeError):
    pass


class ConfigError(DyqnError, ValueError):
    pass
