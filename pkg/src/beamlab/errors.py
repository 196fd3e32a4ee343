"""Exception types shared across the package."""


class BeamlabError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(BeamlabError):
    """Invalid configuration, ranges, or CLI arguments."""


class ConstraintError(BeamlabError):
    """A data invariant was violated (e.g. non-real DC/Nyquist bins)."""


class ShapeError(BeamlabError):
    """Array shapes disagree with the declared layout."""
