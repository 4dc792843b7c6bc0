class ExtractionError(Exception):
    """Raised when a feature-extraction request cannot be satisfied."""
