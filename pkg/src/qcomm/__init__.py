"""Desk-scale simulation of quantum communication protocols."""

__version__ = "0.1.0"
