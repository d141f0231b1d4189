"""First-order LP solving with infeasibility certificates from iterate sequences."""

__version__ = "0.1.0"
