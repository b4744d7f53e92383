"""fracground: ground states of the nonlinear fractional Schrödinger equation."""

__version__ = "0.1.0"
