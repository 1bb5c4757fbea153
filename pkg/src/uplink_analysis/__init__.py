"""Analytical and simulation models for UAV-based IoT uplink aggregation."""

__all__ = ["__version__"]

__version__ = "0.1.0"
