"""Experiment runner CLI for the uplink analysis library."""

from __future__ import annotations

__all__ = ["cli"]
