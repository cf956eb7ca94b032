"""
Radial spectral solver for pseudorelativistic Schrodinger equations.
"""
__version__ = "0.1.0"
