"""Germ and pgf orders for branching random walks, varying-environment
branching processes and firework rumor processes."""

__version__ = "0.1.0"
