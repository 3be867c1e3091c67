"""Desk-scale verification workbench for quantum lattice spin models.

Exact spin-S algebra, coherent-state symbol calculus, reflection/chessboard
machinery on small tori, classical Monte Carlo, and spin-wave free energies,
wired together by a suite runner that writes CSV tables and a JSON-lines
result ledger.
"""

__version__ = "0.1.0"

__all__ = [
    "su2kit",
    "symbols",
    "torus",
    "models",
    "quantum_lab",
    "classical_mc",
    "spinwave",
    "cli_runner",
]
