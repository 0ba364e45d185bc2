"""Adapter error types."""


class ExtractionError(Exception):
    """A named input (image, checkpoint, feature dump) cannot be processed."""


class ValidationError(ValueError):
    """Inputs or produced features violate a documented constraint."""
