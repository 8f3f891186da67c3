"""Ground-state solvers for Jordan-Wigner spin Hamiltonians."""

__version__ = "0.1.0"
