"""Exception types shared by all modules."""


class RelMdimError(Exception):
    """Base class for every error raised by this package."""


class DomainError(RelMdimError, ValueError):
    """An argument is outside the domain of the operation."""


class CapacityError(RelMdimError):
    """An exact computation was requested above its size cap."""


class ConstructionError(RelMdimError):
    """A constructive procedure failed its post-hoc verification."""


class CommutationError(ConstructionError):
    """A candidate factor map does not intertwine the two dynamics."""


class SurjectivityError(ConstructionError):
    """A candidate factor map misses some codomain point."""


class ConstraintError(RelMdimError):
    """No member of a measure family satisfies a pushforward constraint."""

    def __init__(self, message, closest=None):
        super().__init__(message)
        self.closest = closest
