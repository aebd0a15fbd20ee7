"""RGN-CPD - Riemannian Gauss-Newton for rank-r CP decompositions."""

__version__ = "1.0.0"
