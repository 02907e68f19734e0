"""Detonation-wave existence and stability toolkit for the scalar Majda model."""

from .errors import *  # noqa: F401,F403
from .model import FluxSpec, IgnitionSpec, ModelConfig, p0, validate_config

__version__ = "0.1.0"

__all__ = ["FluxSpec", "IgnitionSpec", "ModelConfig", "p0", "validate_config", "__version__"]
