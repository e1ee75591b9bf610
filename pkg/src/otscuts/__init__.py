"""Node-based polyhedral tools for DC optimal transmission switching."""

__version__ = "0.1.0"
