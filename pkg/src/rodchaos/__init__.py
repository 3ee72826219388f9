"""Equilibria of an extensible, shearable conducting rod in a uniform magnetic field.

Noncanonical and canonical Hamiltonian formulations, the field-free
homoclinic orbit, its Mel'nikov function and numerical diagnostics of
spatial chaos.
"""

__version__ = "0.1.0"
