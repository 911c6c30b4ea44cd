"""Exception hierarchy shared by every module."""


class RigidLimError(Exception):
    """Base class for all errors raised by rigidlim."""


class InvalidWordError(RigidLimError, ValueError):
    pass


class CapacityError(RigidLimError):
    """Raised when an enumeration would exceed the configured word cap."""


class DomainEscapeError(RigidLimError):
    """An intermediate point of a composition left the working domain."""


class SingularMapError(RigidLimError):
    pass


class ConstructionRejectedError(RigidLimError):
    """A conjugated system failed the norm-product admissibility bound."""

    def __init__(self, message, norms=None):
        super().__init__(message)
        self.norms = dict(norms or {})


class DimensionMismatchError(RigidLimError, ValueError):
    pass


class DegenerateCloudError(RigidLimError):
    pass


class ResolutionError(RigidLimError):
    """A requested radius is below the scale the cylinder table resolves."""


class PreconditionError(RigidLimError, ValueError):
    pass


class InvalidWitnessError(RigidLimError):
    pass


class ConfigError(RigidLimError):
    """Malformed system configuration; ``field`` names the offending entry."""

    def __init__(self, message, field=None, line=None):
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.field = field
        self.line = line
