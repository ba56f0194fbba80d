"""Shifted interface method for transient Biot poroelasticity with embedded cracks."""

__version__ = "0.1.0"
