"""Coded MPC for matrix polynomial evaluation with cheater elimination."""

__version__ = "0.1.0"

from .gf import DEFAULT_PRIME, FMatrix

__all__ = ["DEFAULT_PRIME", "FMatrix", "__version__"]
