"""Exception hierarchy shared by all sentinel modules."""


class SentinelError(Exception):
    """Base class for all sentinel errors."""


class InvalidInput(SentinelError):
    """An operation received an input that violates its preconditions."""


class InvalidState(SentinelError):
    """An operation was invoked on an object in an unusable state."""


class ConfigError(SentinelError):
    """A hashing configuration combines incompatible options."""


class FormatError(SentinelError):
    """A manifest, bundle, or payload could not be parsed."""


class ValidationError(SentinelError):
    """Data failed a semantic check (e.g. undeclared source id)."""


class ResourceError(SentinelError):
    """An allocation or I/O resource could not be obtained."""


class KeyMaterialError(SentinelError):
    """Signing key material is missing, malformed, or unusable."""
