"""Noisy geometrically local circuits: simulation, Pauli-basis locality and samplers."""

__version__ = "0.1.0"
