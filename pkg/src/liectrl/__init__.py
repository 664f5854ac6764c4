"""Linear control systems on simply connected nilpotent Lie groups."""

__version__ = "0.1.0"
