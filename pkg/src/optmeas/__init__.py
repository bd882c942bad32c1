"""Optimal minimal measurements for copies of an isotropically distributed qubit."""

__version__ = "0.1.0"
