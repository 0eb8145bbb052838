"""matchcut: joint graph matching and two-way clustering via one convex
semidefinite relaxation, with rounding, metrics, and brute-force oracles."""

__version__ = "0.1.0"
