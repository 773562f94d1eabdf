"""Adaptive finite element reconstruction of dielectric constants from
backscattered time-domain data."""

from ._core import *  # noqa: F401,F403
from ._core import __version__, Error, IoError, NumericalError, ConfigError  # noqa: F401
