"""Error taxonomy shared by the library and the command line front end."""

from __future__ import annotations

__all__ = ["SrtkitError", "ConfigError", "DataError"]


class SrtkitError(Exception):
    """Base class for errors raised by srtkit."""


class ConfigError(SrtkitError):
    """Invalid configuration file, option value, or option combination."""

    exit_code = 2


class DataError(SrtkitError):
    """Input data that cannot be ingested (bad schema, empty file, ...)."""

    exit_code = 3
