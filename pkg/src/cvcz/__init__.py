"""Gaussian simulation of a measurement-based controlled-phase gate."""
