"""Simulation and verification toolkit for a time-changed Brownian setting
in which a Brownian motion reaches zero exactly at a random clock time."""

__version__ = "0.1.0"
