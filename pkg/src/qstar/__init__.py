"""qstar: interpreter and verification workbench for a linear quantum
lambda calculus with destructive measurement."""

__version__ = "0.1.0"
