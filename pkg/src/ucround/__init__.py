"""Relax-and-round heuristics and an objective feasibility pump for UC-ACOPF."""

__version__ = "0.1.0"
