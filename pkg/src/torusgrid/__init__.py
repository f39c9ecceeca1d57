"""Deciding equivalence of grid diagrams of links on the torus modulo
exchange moves and one chosen oriented type of (de)stabilization."""

__version__ = "0.1.0"
