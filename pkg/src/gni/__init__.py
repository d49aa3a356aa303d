"""Structure-preserving integrators for nonholonomic mechanical systems."""

__version__ = "0.1.0"
