"""Two-phase square-function coefficients, capacities and corona constructions."""

__version__ = "0.1.0"
