"""Zero-temperature cavity damping and lossy cavity-field state engineering."""

__version__ = "0.1.0"
