"""Logical gates and memory on repetition codes of cat qubits, with exact Monte Carlo."""

__version__ = "0.1.0"
