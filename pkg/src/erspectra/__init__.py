"""Desk-scale numerics for the spectral edge of sparse Erdos-Renyi graphs.

The package samples graphs, extracts edge eigenpairs of ``H = A / sqrt(d)``,
evaluates closed-form eigenvalue predictors built from vertex degrees, builds
the approximate tridiagonal basis around high-degree vertices and runs
Monte Carlo checks of rigidity, Poisson statistics and localization.
"""

from erspectra.config import Config
from erspectra.errors import ConvergenceError, DomainError, NotATreeError

__all__ = ["Config", "ConvergenceError", "DomainError", "NotATreeError"]
__version__ = "0.1.0"
