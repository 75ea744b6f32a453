"""Hybrid quantum-classical regression for molecular property prediction."""

__version__ = "0.1.0"
