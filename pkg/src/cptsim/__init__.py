"""Steady-state simulator for three-level Lambda emitters in free space and in a driven cavity."""

__version__ = "0.1.0"
