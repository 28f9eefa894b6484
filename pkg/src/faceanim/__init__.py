"""Controllable face reenactment on oracle-checked synthetic faces."""

__version__ = "0.1.0"
