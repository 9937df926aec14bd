"""Churn prediction experiments over daily download series."""

__version__ = "0.1.0"
