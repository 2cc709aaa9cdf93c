"""Rule-driven legalization of binary topologies.

From a generated topology the module extracts the pattern-dependent
constraint sets (width runs, space runs, polygon cells) and solves the
feasibility system

    delta > 0,  sum(delta_x) = sum(delta_y) = window,
    run sums >= Space_min / Width_min,  polygon areas in [Area_min, Area_max]

for concrete geometric vectors.  The iterative projection kernel lives in
squishgen._solver (compiled when available); every returned solution is
rounded to integer nm and re-verified exactly before it leaves this module.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from . import rng
from ._solver import project
from .errors import InfeasibleError, ParameterError

DEFAULT_MAX_ITERS = 10_000
# Slack per attempt so integer rounding stays legal; the last attempt uses the
# exact bounds so systems pinned by the sum constraint (e.g. a full-window
# cell at area_max) remain solvable.
_RUN_MARGINS = (1.0, 2.0, 0.0)
_AREA_MARGIN_FRACS = (1e-3, 3e-3, 0.0)


@dataclass(frozen=True)
class RuleSet:
    """Design-rule constants in nm / nm^2 plus the physical window extent."""

    space_min: int
    width_min: int
    area_min: int
    area_max: int
    window: int

    def __post_init__(self):
        if min(self.space_min, self.width_min, self.area_min, self.area_max, self.window) <= 0:
            raise ParameterError("all rule values must be positive")
        if self.area_min > self.area_max:
            raise ParameterError("area_min must not exceed area_max")
        if max(self.space_min, self.width_min) > self.window:
            raise ParameterError("space_min/width_min cannot exceed the window")


class Run(NamedTuple):
    axis: str  # 'x': constrains delta_x (row runs); 'y': delta_y (column runs)
    line: int  # representative row/column index the run was found on
    a: int
    b: int


@dataclass
class ConstraintSet:
    width_runs: list[Run]
    space_runs: list[Run]
    polygons: list[np.ndarray]  # each (n_cells, 2) of (row, col)


@dataclass
class SolveDiagnostics:
    iterations: int
    residual: float
    initializer: str
    attempts: int


@dataclass
class Solution:
    delta_x: np.ndarray  # int64 nm
    delta_y: np.ndarray
    diagnostics: SolveDiagnostics


def prefilter(topology) -> str | None:
    """Return None to accept, or a rejection reason.

    Rejects iff some 2x2 window is a checkerboard ([[1,0],[0,1]] or its
    mirror): two shapes meeting only at a point (bow-tie).
    """
    t = np.asarray(topology, dtype=np.uint8)
    if t.shape[0] < 2 or t.shape[1] < 2:
        return None
    a, b = t[:-1, :-1], t[:-1, 1:]
    c, d = t[1:, :-1], t[1:, 1:]
    bad = (a == d) & (b == c) & (a != b)
    if bad.any():
        r, cidx = np.argwhere(bad)[0]
        return f"bow-tie at ({r}, {cidx})"
    return None


def _line_runs(line: np.ndarray):
    """Maximal (value, a, b) runs of a binary line."""
    runs = []
    start = 0
    for i in range(1, len(line) + 1):
        if i == len(line) or line[i] != line[start]:
            runs.append((int(line[start]), start, i - 1))
            start = i
    return runs


def extract_constraints(topology, rules: RuleSet) -> ConstraintSet:
    """Pattern-dependent constraint sets for the feasibility system.

    Per row, every maximal 1-run contributes a width run on the x axis and
    every 0-run strictly between two 1-runs a space run; columns contribute
    the y-axis runs symmetrically.  Runs are deduplicated on (axis, a, b).
    Polygons are the 4-connected components of 1-cells.
    """
    t = np.asarray(topology, dtype=np.uint8)
    width_runs: dict[tuple, Run] = {}
    space_runs: dict[tuple, Run] = {}

    def scan(lines, axis):
        for li, line in enumerate(lines):
            runs = _line_runs(line)
            for ri, (val, a, b) in enumerate(runs):
                if val == 1:
                    width_runs.setdefault((axis, a, b), Run(axis, li, a, b))
                elif 0 < ri < len(runs) - 1:
                    space_runs.setdefault((axis, a, b), Run(axis, li, a, b))

    scan(t, "x")
    scan(t.T, "y")

    labels, count = ndimage.label(t)
    polygons = [np.argwhere(labels == lab) for lab in range(1, count + 1)]
    return ConstraintSet(
        width_runs=list(width_runs.values()),
        space_runs=list(space_runs.values()),
        polygons=polygons,
    )


def verify_solution(topology, rules: RuleSet, delta_x, delta_y, constraints=None) -> list[str]:
    """Exact integer check of every constraint; returns violation messages."""
    t = np.asarray(topology, dtype=np.uint8)
    dx = np.asarray(delta_x, dtype=np.int64)
    dy = np.asarray(delta_y, dtype=np.int64)
    cs = constraints if constraints is not None else extract_constraints(t, rules)
    problems = []
    if (dx <= 0).any() or (dy <= 0).any():
        problems.append("non-positive delta")
    if dx.sum() != rules.window:
        problems.append(f"sum(delta_x)={dx.sum()} != window={rules.window}")
    if dy.sum() != rules.window:
        problems.append(f"sum(delta_y)={dy.sum()} != window={rules.window}")
    for run, bound, kind in [
        *((r, rules.width_min, "width") for r in cs.width_runs),
        *((r, rules.space_min, "space") for r in cs.space_runs),
    ]:
        vec = dx if run.axis == "x" else dy
        got = int(vec[run.a : run.b + 1].sum())
        if got < bound:
            problems.append(f"{kind} run {run} sums to {got} < {bound}")
    for pi, cells in enumerate(cs.polygons):
        area = int((dx[cells[:, 1]] * dy[cells[:, 0]]).sum())
        if not rules.area_min <= area <= rules.area_max:
            problems.append(
                f"polygon {pi} area {area} outside [{rules.area_min}, {rules.area_max}]"
            )
    return problems


def _pack_constraints(cs: ConstraintSet, rules: RuleSet, margin: float):
    def pack(axis):
        runs = [(r, rules.width_min) for r in cs.width_runs if r.axis == axis]
        runs += [(r, rules.space_min) for r in cs.space_runs if r.axis == axis]
        a = np.array([r.a for r, _ in runs], dtype=np.int64)
        b = np.array([r.b for r, _ in runs], dtype=np.int64)
        m = np.array([bound + margin for _, bound in runs], dtype=np.float64)
        return a, b, m

    xa, xb, xm = pack("x")
    ya, yb, ym = pack("y")
    if cs.polygons:
        cell_off = np.cumsum([0] + [len(p) for p in cs.polygons]).astype(np.int64)
        cell_r = np.concatenate([p[:, 0] for p in cs.polygons]).astype(np.int64)
        cell_c = np.concatenate([p[:, 1] for p in cs.polygons]).astype(np.int64)
        urows = [np.unique(p[:, 0]) for p in cs.polygons]
        ucols = [np.unique(p[:, 1]) for p in cs.polygons]
        urow_off = np.cumsum([0] + [len(u) for u in urows]).astype(np.int64)
        ucol_off = np.cumsum([0] + [len(u) for u in ucols]).astype(np.int64)
        urow = np.concatenate(urows).astype(np.int64)
        ucol = np.concatenate(ucols).astype(np.int64)
    else:
        cell_off = np.zeros(1, dtype=np.int64)
        cell_r = cell_c = urow = ucol = np.zeros(0, dtype=np.int64)
        urow_off = ucol_off = np.zeros(1, dtype=np.int64)
    return xa, xb, xm, ya, yb, ym, cell_r, cell_c, cell_off, urow, urow_off, ucol, ucol_off


def _round_to_window(d: np.ndarray, window: int) -> np.ndarray | None:
    """Round to integer nm, dumping the residue on the largest interval."""
    r = np.maximum(np.rint(d).astype(np.int64), 1)
    residue = window - int(r.sum())
    i = int(np.argmax(r))
    r[i] += residue
    if r[i] < 1:
        return None
    return r


def solve(
    topology,
    rules: RuleSet,
    constraints: ConstraintSet | None = None,
    initializer="random",
    seed: int = 0,
    max_iters: int = DEFAULT_MAX_ITERS,
    kernel=project,
) -> Solution:
    """Solve the feasibility system for one topology.

    initializer: "random" draws the start point from a symmetric Dirichlet
    scaled to the window (Solving-R); a sequence of (delta_x, delta_y) pairs
    samples a length-matching library entry (Solving-E), falling back to
    random when none matches.  Deterministic for fixed inputs and seed.
    Raises InfeasibleError when the iteration cap is reached.
    """
    t = np.asarray(topology, dtype=np.uint8)
    ny, nx = t.shape
    s = rules.window
    if nx > s or ny > s:
        raise InfeasibleError(f"window {s} nm cannot hold {ny}x{nx} intervals", 0)
    cs = constraints if constraints is not None else extract_constraints(t, rules)

    library = None if isinstance(initializer, str) else list(initializer)
    matching = None
    if library is not None:
        matching = [
            (np.asarray(lx, dtype=np.float64), np.asarray(ly, dtype=np.float64))
            for lx, ly in library
            if len(lx) == nx and len(ly) == ny
        ]
    total_iters = 0

    for attempt, (margin, afrac) in enumerate(zip(_RUN_MARGINS, _AREA_MARGIN_FRACS)):
        gen = rng.stream(seed, attempt)
        used = "random" if library is None else "library"
        dx = dy = None
        if matching is not None:
            if matching:
                lx, ly = matching[int(gen.integers(len(matching)))]
                dx, dy = lx.copy(), ly.copy()
            else:
                used = "random-fallback"
        if dx is None:
            dx = gen.dirichlet(np.ones(nx)) * s
            dy = gen.dirichlet(np.ones(ny)) * s
        dx = np.maximum(dx * (s / dx.sum()), 1.0)
        dy = np.maximum(dy * (s / dy.sum()), 1.0)

        amin_eff = rules.area_min * (1.0 + afrac)
        amax_eff = rules.area_max * (1.0 - afrac)
        if amin_eff >= amax_eff:
            amin_eff, amax_eff = float(rules.area_min), float(rules.area_max)
        packed = _pack_constraints(cs, rules, margin)
        converged, iters = kernel(
            dx,
            dy,
            *packed,
            amin_eff,
            amax_eff,
            float(s),
            float(s),
            1.0,
            1e-6,
            1e-6 * rules.area_max,
            max_iters,
        )
        total_iters += iters
        if not converged:
            continue
        rx = _round_to_window(dx, s)
        ry = _round_to_window(dy, s)
        if rx is None or ry is None:
            continue
        if verify_solution(t, rules, rx, ry, cs):
            continue
        return Solution(
            delta_x=rx,
            delta_y=ry,
            diagnostics=SolveDiagnostics(
                iterations=total_iters,
                residual=0.0,
                initializer=used,
                attempts=attempt + 1,
            ),
        )
    raise InfeasibleError(
        f"no legal geometry within {max_iters} iterations per attempt", total_iters
    )


@dataclass
class SolveManyResult:
    solutions: list[Solution]
    fully_determined: bool
    requested: int

    @property
    def complete(self) -> bool:
        return self.fully_determined or len(self.solutions) >= self.requested


def solve_many(
    topology,
    rules: RuleSet,
    n: int,
    seed: int = 0,
    initializer="random",
    max_attempts: int | None = None,
) -> SolveManyResult:
    """Find up to n pairwise-distinct solutions (distinct after rounding).

    A 1x1 topology is fully determined by the sum constraint; the result is
    flagged and contains the single solution.  Otherwise random restarts run
    until n distinct solutions are found or the attempt cap is hit (partial
    results carry complete=False).
    """
    t = np.asarray(topology, dtype=np.uint8)
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    cs = extract_constraints(t, rules)
    if t.shape == (1, 1):
        sol = solve(t, rules, cs, initializer, seed)
        return SolveManyResult([sol], fully_determined=True, requested=n)

    attempts = max_attempts if max_attempts is not None else max(20 * n, 50)
    seen: set[tuple] = set()
    solutions: list[Solution] = []
    seeder = rng.stream(seed, "solve-many")
    for _ in range(attempts):
        sub_seed = int(seeder.integers(np.iinfo(np.int64).max))
        try:
            sol = solve(t, rules, cs, initializer, sub_seed)
        except InfeasibleError:
            continue
        key = (tuple(sol.delta_x.tolist()), tuple(sol.delta_y.tolist()))
        if key in seen:
            continue
        seen.add(key)
        solutions.append(sol)
        if len(solutions) >= n:
            break
    return SolveManyResult(solutions, fully_determined=False, requested=n)
