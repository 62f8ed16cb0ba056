"""Predictive cooperative relay planning for semantic data between two RSU islands."""

__version__ = "0.1.0"
