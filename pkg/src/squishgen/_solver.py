"""Solver kernel backend selection.

Prefers the compiled extension and falls back to the pure-Python mirror when
it is not built.  Both backends share one contract and produce bit-identical
results; BACKEND names the active one ("compiled" or "python").
"""

try:
    from ._solver_cy import BACKEND, project
except ImportError:  # extension not built
    from ._solver_py import BACKEND, project

from . import _solver_py

__all__ = ["BACKEND", "project", "_solver_py"]
