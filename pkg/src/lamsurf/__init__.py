"""Numerical toolkit for λ-hypersurfaces of the weighted volume-preserving
mean curvature flow."""

__version__ = "0.1.0"
