"""Exception types shared across the package."""


class SeedselError(Exception):
    """Base class for all package-specific errors."""


class PackFormatError(SeedselError):
    """File is not a recognizable feature pack (bad magic or version)."""


class PackCorruptionError(SeedselError):
    """File looks like a pack but header and payload disagree."""


class ValidationError(SeedselError, ValueError):
    """Data or parameters violate a documented invariant."""
