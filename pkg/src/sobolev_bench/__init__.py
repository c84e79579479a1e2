"""Sobolev-training workbench: trainers, PDE losses and depth-vs-width bounds."""

__version__ = "0.1.0"
