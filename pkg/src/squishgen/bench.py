"""Benchmarks: solver initializers (random vs. library) and kernel backends.

benchmark_initializers runs the legalization solver twice over one instance
set, once from random starts and once seeded from a delta library, and
reports mean solve times and convergence counts.  benchmark_backends times
the compiled kernel against the pure-Python mirror on identical inputs and
checks that both produce identical solutions.
"""

from __future__ import annotations

import time

import numpy as np

from . import _solver
from ._solver import _solver_py
from .errors import InfeasibleError
from .legalize import RuleSet, solve


def _run_variant(topologies, rules: RuleSet, initializer, seed: int, kernel) -> dict:
    times = []
    converged = 0
    solutions = []
    for i, topo in enumerate(topologies):
        t0 = time.perf_counter()
        try:
            sol = solve(topo, rules, initializer=initializer, seed=seed + i, kernel=kernel)
            converged += 1
            solutions.append((sol.delta_x.tolist(), sol.delta_y.tolist()))
        except InfeasibleError:
            solutions.append(None)
        times.append(time.perf_counter() - t0)
    return {
        "mean_s": float(np.mean(times)),
        "total_s": float(np.sum(times)),
        "converged": converged,
        "instances": len(list(topologies)),
        "solutions": solutions,
    }


def benchmark_initializers(topologies, rules: RuleSet, library, seed: int = 0) -> dict:
    """Solving-R vs Solving-E on the same instances; the ratio is reported,
    never asserted (it is corpus-dependent)."""
    topologies = list(topologies)
    solving_r = _run_variant(topologies, rules, "random", seed, _solver.project)
    solving_e = _run_variant(topologies, rules, library, seed, _solver.project)
    report = {
        "instances": len(topologies),
        "solving_r": {k: v for k, v in solving_r.items() if k != "solutions"},
        "solving_e": {k: v for k, v in solving_e.items() if k != "solutions"},
    }
    if solving_e["mean_s"] > 0:
        report["speedup_e_over_r"] = solving_r["mean_s"] / solving_e["mean_s"]
    return report


def benchmark_backends(topologies, rules: RuleSet, seed: int = 0) -> dict:
    """Compiled vs pure-Python kernel on identical instances and seeds."""
    topologies = list(topologies)
    report = {"active_backend": _solver.BACKEND, "instances": len(topologies)}
    py = _run_variant(topologies, rules, "random", seed, _solver_py.project)
    report["python"] = {k: v for k, v in py.items() if k != "solutions"}
    if _solver.BACKEND == "compiled":
        comp = _run_variant(topologies, rules, "random", seed, _solver.project)
        report["compiled"] = {k: v for k, v in comp.items() if k != "solutions"}
        report["identical_results"] = comp["solutions"] == py["solutions"]
        if comp["mean_s"] > 0:
            report["speedup_compiled_over_python"] = py["mean_s"] / comp["mean_s"]
    return report
