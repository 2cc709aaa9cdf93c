#!/usr/bin/env python3
"""Solver benchmark: initializer variants and kernel backends.

Builds a synthetic topology corpus, derives a delta library by solving part
of it from random starts, then times:

  - Solving-R (random Dirichlet starts) vs Solving-E (library starts)
  - the compiled kernel vs the pure-Python mirror (identical inputs)

Usage: python benchmarks/bench_solver.py [--instances N] [--side S] [--out report.json]
"""

import argparse
import json

import numpy as np

from squishgen import RuleSet, solve
from squishgen.bench import benchmark_backends, benchmark_initializers
from squishgen.synthetic import synthetic_topologies


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--instances", type=int, default=50)
    parser.add_argument("--side", type=int, default=16)
    parser.add_argument("--window", type=int, default=2048)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    rules = RuleSet(
        space_min=100,
        width_min=100,
        area_min=10**4,
        area_max=args.window**2,
        window=args.window,
    )
    topologies = list(synthetic_topologies(args.instances, args.side, args.seed))

    # library from an independent slice of the corpus, solved with random starts
    library_src = synthetic_topologies(args.instances, args.side, args.seed + 1)
    library = []
    for i, topo in enumerate(library_src):
        sol = solve(topo, rules, seed=10_000 + i)
        library.append((sol.delta_x, sol.delta_y))

    init_report = benchmark_initializers(topologies, rules, library, seed=args.seed)
    backend_report = benchmark_backends(topologies, rules, seed=args.seed)
    report = {"initializers": init_report, "backends": backend_report}

    r, e = init_report["solving_r"], init_report["solving_e"]
    print(f"instances: {init_report['instances']} ({args.side}x{args.side}, window {args.window} nm)")
    print(f"Solving-R: mean {r['mean_s'] * 1e3:8.3f} ms  converged {r['converged']}/{r['instances']}")
    print(f"Solving-E: mean {e['mean_s'] * 1e3:8.3f} ms  converged {e['converged']}/{e['instances']}")
    if "speedup_e_over_r" in init_report:
        print(f"Solving-E speedup over Solving-R: {init_report['speedup_e_over_r']:.2f}x")
    print(f"active kernel backend: {backend_report['active_backend']}")
    py = backend_report["python"]
    print(f"python kernel:   mean {py['mean_s'] * 1e3:8.3f} ms")
    if "compiled" in backend_report:
        comp = backend_report["compiled"]
        print(f"compiled kernel: mean {comp['mean_s'] * 1e3:8.3f} ms")
        print(f"compiled speedup: {backend_report['speedup_compiled_over_python']:.2f}x")
        print(f"identical results across backends: {backend_report['identical_results']}")

    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=1, sort_keys=True)
        print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
