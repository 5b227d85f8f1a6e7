"""Agent-based lab for cognitive amplification versus delegation."""

__version__ = "0.1.0"
