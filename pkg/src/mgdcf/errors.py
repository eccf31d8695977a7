"""Exception types shared across the package."""


class ConfigurationError(Exception):
    """A setting or a combination of inputs the engine cannot operate on."""


class DataFormatError(Exception):
    """An interaction file that cannot be parsed or fails an integrity check."""
