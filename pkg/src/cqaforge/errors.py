"""Exception types shared across the pipeline stages."""


class ForgeError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ForgeError):
    """Invalid configuration value or unusable config file."""


class TemplateError(ForgeError):
    """Template file missing placeholders or otherwise malformed."""


class TokenizationError(ForgeError):
    """Boundary-consistency violation or an untokenizable sample."""


class DatasetError(ForgeError):
    """Corrupt or inconsistent dataset file."""


class EndpointError(ForgeError):
    """Chat-completion endpoint failed after bounded retries."""


class BenchmarkError(ForgeError):
    """Benchmark file unusable (unknown adapter, zero valid rows)."""


class SweepError(ForgeError):
    """Invalid sweep specification or empty result log."""
