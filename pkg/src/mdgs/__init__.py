"""Exact ground states of the disordered monomer-dimer model."""

__version__ = "0.1.0"
