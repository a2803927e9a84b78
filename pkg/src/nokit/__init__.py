"""Discretization-agnostic neural operator layers and the machinery to train and test them."""

__version__ = "0.1.0"
