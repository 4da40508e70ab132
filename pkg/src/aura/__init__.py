"""Autonomous incident-resolution engine for simulated EV charging fleets."""

__version__ = "0.1.0"
