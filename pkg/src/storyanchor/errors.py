"""Exception hierarchy shared across the package."""


class StoryAnchorError(Exception):
    """Base class for all package errors."""


class ShapeError(StoryAnchorError):
    """Operand shapes are incompatible; message names both shapes."""


class DataError(StoryAnchorError):
    """Dataset content is invalid or missing (bad manifest, missing ids)."""


class FormatError(StoryAnchorError):
    """A binary or JSON file does not match its documented format."""


class DivergedError(StoryAnchorError):
    """Training produced a non-finite loss."""


class ConfigError(StoryAnchorError):
    """Invalid or unknown configuration keys/values."""
