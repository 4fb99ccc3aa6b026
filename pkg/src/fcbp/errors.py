"""Exception types shared across the package."""


class ConfigError(Exception):
    """Invalid configuration: bad geometry, bad training settings, unknown keys."""


class FormatError(Exception):
    """A binary or JSON artifact on disk does not match its expected layout."""
