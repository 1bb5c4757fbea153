"""Exceptions shared by the numerical modules."""

from __future__ import annotations


class NumericalError(Exception):
    """Raised when a numerical routine cannot reach its tolerance."""

    def __init__(self, message: str, estimated_error: float | None = None) -> None:
        super().__init__(message)
        self.estimated_error = estimated_error
