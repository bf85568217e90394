"""
grca: nonlinear hyperspectral unmixing with gamma Markov random fields.
"""

__version__ = "0.3.0"
