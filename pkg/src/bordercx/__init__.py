"""Exact border-complexity toolkit: eps-calculus, decompositions, circuit passes, multiplicities."""

__version__ = "0.1.0"
