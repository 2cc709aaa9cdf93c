"""Synthetic corpora: random topologies and random rectilinear layouts.

Stand-ins for proprietary pattern libraries in tests, demos, and benchmarks.
Topologies are unions of axis-aligned bars/rectangles, rejection-sampled until
they pass the bow-tie pre-filter; layouts are interior-disjoint rectangles and
L-shapes on an integer grid.
"""

from __future__ import annotations

import numpy as np

from . import rng
from .legalize import prefilter
from .squish import LayoutPattern


def random_topology(side: int, gen: np.random.Generator, max_shapes: int = 4) -> np.ndarray:
    """One side x side binary topology passing the pre-filter, not all-zero."""
    while True:
        t = np.zeros((side, side), dtype=np.uint8)
        for _ in range(int(gen.integers(1, max_shapes + 1))):
            kind = gen.integers(3)
            if kind == 0:  # horizontal bar
                r = int(gen.integers(side))
                c1 = int(gen.integers(side))
                c2 = int(gen.integers(c1, side))
                t[r, c1 : c2 + 1] = 1
            elif kind == 1:  # vertical bar
                c = int(gen.integers(side))
                r1 = int(gen.integers(side))
                r2 = int(gen.integers(r1, side))
                t[r1 : r2 + 1, c] = 1
            else:  # rectangle
                r1 = int(gen.integers(side))
                r2 = int(gen.integers(r1, side))
                c1 = int(gen.integers(side))
                c2 = int(gen.integers(c1, side))
                t[r1 : r2 + 1, c1 : c2 + 1] = 1
        if t.any() and prefilter(t) is None:
            return t


def synthetic_topologies(count: int, side: int, seed: int) -> np.ndarray:
    """Corpus of `count` pre-filter-clean topologies, shape (N, side, side)."""
    out = np.empty((count, side, side), dtype=np.uint8)
    for i in range(count):
        out[i] = random_topology(side, rng.stream(seed, "synthetic", i))
    return out


def _interior_disjoint(box, boxes) -> bool:
    x1, y1, x2, y2 = box
    for a1, b1, a2, b2 in boxes:
        if x1 < a2 and a1 < x2 and y1 < b2 and b1 < y2:
            return False
    return True


def random_layout(
    window: tuple[int, int],
    gen: np.random.Generator,
    max_polygons: int = 20,
    grid: int = 64,
) -> LayoutPattern:
    """Random layout of 1..max_polygons interior-disjoint rectangles/L-shapes.

    Vertices snap to a coarse grid so touching edges and corners occur often,
    which exercises the codec's merge and pinch handling.
    """
    w, h = window
    target = int(gen.integers(1, max_polygons + 1))
    boxes: list[tuple[int, int, int, int]] = []
    polygons = []
    tries = 0
    while len(polygons) < target and tries < 200:
        tries += 1
        x1 = int(gen.integers(0, w // grid)) * grid
        y1 = int(gen.integers(0, h // grid)) * grid
        x2 = x1 + int(gen.integers(1, max(2, (w - x1) // grid + 1))) * grid
        y2 = y1 + int(gen.integers(1, max(2, (h - y1) // grid + 1))) * grid
        x2, y2 = min(x2, w), min(y2, h)
        if x2 <= x1 or y2 <= y1:
            continue
        box = (x1, y1, x2, y2)
        if not _interior_disjoint(box, boxes):
            continue
        boxes.append(box)
        if x2 - x1 >= 2 * grid and y2 - y1 >= 2 * grid and gen.random() < 0.4:
            cx = x1 + int(gen.integers(1, (x2 - x1) // grid)) * grid
            cy = y1 + int(gen.integers(1, (y2 - y1) // grid)) * grid
            # L-shape: rectangle with the top-right corner cut away
            polygons.append([(x1, y1), (x2, y1), (x2, cy), (cx, cy), (cx, y2), (x1, y2)])
        else:
            polygons.append([(x1, y1), (x2, y1), (x2, y2), (x1, y2)])
    return LayoutPattern(window=window, polygons=polygons)
