"""Lossless squish codec for rectilinear layout patterns.

A layout inside a fixed window is cut by scan lines at every distinct polygon
edge coordinate (window boundaries included).  The cells of the resulting
grid are homogeneous, so the layout is equivalent to a binary topology matrix
plus the two vectors of scan-line gaps (delta_x, delta_y).  Conventions used
throughout the package:

- topology[row, col] with row 0 at the smallest y and col 0 at the smallest x;
- delta_x has one entry per column, delta_y one per row, both in integer nm;
- a cell is 1 iff its open interior is covered; scan lines carry no area.

The deep form folds each sqrt(C) x sqrt(C) patch of the topology matrix into
one spatial cell with C binary channels (row-major patch order), which is the
state space of the diffusion model.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .errors import CapacityError, ShapeError, ValidationError

Point = tuple[int, int]
Polygon = list[Point]


@dataclass(frozen=True)
class LayoutPattern:
    """Rectilinear polygons on an integer nm grid inside a fixed window."""

    window: tuple[int, int]
    polygons: list[Polygon]


@dataclass(frozen=True)
class SquishPattern:
    """Binary topology matrix plus per-axis scan-line gap vectors."""

    topology: np.ndarray  # (n_y, n_x) uint8
    delta_x: np.ndarray  # (n_x,) int64 nm
    delta_y: np.ndarray  # (n_y,) int64 nm

    def window(self) -> tuple[int, int]:
        return int(self.delta_x.sum()), int(self.delta_y.sum())


class Complexity(NamedTuple):
    c_x: int
    c_y: int


def _edges(poly: Polygon):
    n = len(poly)
    return [(poly[i], poly[(i + 1) % n]) for i in range(n)]


def _segments_conflict(e, f) -> bool:
    """True if two axis-parallel segments share any point."""
    (x1, y1), (x2, y2) = e
    (x3, y3), (x4, y4) = f
    e_vert = x1 == x2
    f_vert = x3 == x4
    if e_vert and f_vert:
        if x1 != x3:
            return False
        lo1, hi1 = sorted((y1, y2))
        lo2, hi2 = sorted((y3, y4))
        return hi1 >= lo2 and hi2 >= lo1
    if not e_vert and not f_vert:
        if y1 != y3:
            return False
        lo1, hi1 = sorted((x1, x2))
        lo2, hi2 = sorted((x3, x4))
        return hi1 >= lo2 and hi2 >= lo1
    if e_vert:
        e, f = f, e
        (x1, y1), (x2, y2) = e
        (x3, y3), (x4, y4) = f
    # e horizontal at y1, f vertical at x3
    lo_x, hi_x = sorted((x1, x2))
    lo_y, hi_y = sorted((y3, y4))
    return lo_x <= x3 <= hi_x and lo_y <= y1 <= hi_y


def validate_layout(pattern: LayoutPattern) -> None:
    """Check structural invariants; raises ValidationError naming the polygon."""
    w, h = pattern.window
    if w <= 0 or h <= 0:
        raise ValidationError(f"window must be positive, got {pattern.window}")
    for pi, poly in enumerate(pattern.polygons):
        n = len(poly)
        if n < 4 or n % 2 != 0:
            raise ValidationError(
                f"polygon {pi}: needs an even vertex count >= 4, got {n}"
            )
        for x, y in poly:
            if not (0 <= x <= w and 0 <= y <= h):
                raise ValidationError(
                    f"polygon {pi}: vertex ({x},{y}) outside window {w}x{h}"
                )
        edges = _edges(poly)
        prev_vert = None
        for ei, ((x1, y1), (x2, y2)) in enumerate(edges):
            if x1 == x2 and y1 == y2:
                raise ValidationError(f"polygon {pi}: zero-length edge at vertex {ei}")
            if x1 != x2 and y1 != y2:
                raise ValidationError(f"polygon {pi}: diagonal edge at vertex {ei}")
            vert = x1 == x2
            if prev_vert is not None and vert == prev_vert:
                raise ValidationError(
                    f"polygon {pi}: edges must alternate horizontal/vertical "
                    f"(vertex {ei})"
                )
            prev_vert = vert
        # closure alternation: last edge vs first
        first_vert = edges[0][0][0] == edges[0][1][0]
        last_vert = edges[-1][0][0] == edges[-1][1][0]
        if first_vert == last_vert:
            raise ValidationError(
                f"polygon {pi}: edges must alternate horizontal/vertical (closure)"
            )
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    continue  # adjacent edges share a vertex by construction
                if _segments_conflict(edges[i], edges[j]):
                    raise ValidationError(
                        f"polygon {pi}: self-intersection between edges {i} and {j}"
                    )


def _vertical_edges(poly: Polygon):
    out = []
    for (x1, y1), (x2, y2) in _edges(poly):
        if x1 == x2:
            out.append((x1, min(y1, y2), max(y1, y2)))
    return out


def extract_squish(pattern: LayoutPattern) -> SquishPattern:
    """Encode a layout as a squish pattern.

    Scan lines are the sorted distinct vertex coordinates per axis plus the
    window boundaries; cell (j, i) is 1 iff its interior lies inside a
    polygon.  Raises ValidationError for malformed or interior-overlapping
    polygons.
    """
    validate_layout(pattern)
    w, h = pattern.window
    xs = sorted({0, w} | {x for poly in pattern.polygons for x, _ in poly})
    ys = sorted({0, h} | {y for poly in pattern.polygons for _, y in poly})
    nx, ny = len(xs) - 1, len(ys) - 1
    cover = np.zeros((ny, nx), dtype=np.int16)

    for pi, poly in enumerate(pattern.polygons):
        vedges = _vertical_edges(poly)
        for j in range(ny):
            yc2 = ys[j] + ys[j + 1]  # doubled cell-centre y; exact integer test
            crossings = sorted(x for x, ylo, yhi in vedges if 2 * ylo < yc2 < 2 * yhi)
            for a, b in zip(crossings[0::2], crossings[1::2]):
                i1 = bisect_left(xs, a)
                i2 = bisect_left(xs, b)
                cover[j, i1:i2] += 1
        if (cover > 1).any():
            raise ValidationError(
                f"polygon {pi}: interior overlaps an earlier polygon"
            )

    return SquishPattern(
        topology=(cover > 0).astype(np.uint8),
        delta_x=np.diff(np.asarray(xs, dtype=np.int64)),
        delta_y=np.diff(np.asarray(ys, dtype=np.int64)),
    )


def _validate_squish(squish: SquishPattern) -> None:
    topo = np.asarray(squish.topology)
    if topo.ndim != 2:
        raise ValidationError(f"topology must be 2-D, got shape {topo.shape}")
    if not np.isin(topo, (0, 1)).all():
        raise ValidationError("topology entries must be 0 or 1")
    for name, delta, n in (
        ("delta_x", squish.delta_x, topo.shape[1]),
        ("delta_y", squish.delta_y, topo.shape[0]),
    ):
        d = np.asarray(delta)
        if d.shape != (n,):
            raise ValidationError(f"{name} length {d.shape} does not match topology")
        if (d <= 0).any():
            raise ValidationError(f"{name} has a zero or negative interval")


# Unit direction steps in vertex-grid space.  At a checkerboard vertex
# (diagonally touching cells of one component) the boundary walk prefers the
# right turn: that joins the two cells' edges across the diagonal, which
# separates the outer outline from the enclosed hole loop instead of
# producing a self-touching figure-eight.
_LEFT = {(1, 0): (0, 1), (0, 1): (-1, 0), (-1, 0): (0, -1), (0, -1): (1, 0)}
_RIGHT = {v: k for k, v in _LEFT.items()}


def _trace_loops(cells: set[tuple[int, int]]):
    """Trace boundary loops of a cell set, interior kept on the left.

    Returns a list of vertex loops in grid index space.  Counterclockwise
    loops (positive signed area) are outer boundaries, clockwise loops are
    holes.
    """
    outgoing: dict[tuple[int, int], list[tuple[int, int]]] = {}

    def add(v, d):
        outgoing.setdefault(v, []).append(d)

    for r, c in cells:
        if (r - 1, c) not in cells:
            add((c, r), (1, 0))  # south side, west -> east
        if (r, c + 1) not in cells:
            add((c + 1, r), (0, 1))  # east side, south -> north
        if (r + 1, c) not in cells:
            add((c + 1, r + 1), (-1, 0))  # north side, east -> west
        if (r, c - 1) not in cells:
            add((c, r + 1), (0, -1))  # west side, north -> south

    loops = []
    while outgoing:
        start = min(outgoing)
        d = outgoing[start][0]
        v = start
        path = []
        while True:
            outs = outgoing[v]
            outs.remove(d)
            if not outs:
                del outgoing[v]
            path.append((v, d))
            v = (v[0] + d[0], v[1] + d[1])
            if v == start:
                break
            choices = outgoing[v]
            if len(choices) == 1:
                d = choices[0]
            else:
                for cand in (_RIGHT[d], d, _LEFT[d]):
                    if cand in choices:
                        d = cand
                        break
        # keep only turn vertices
        loop = [v for (v, d), (_, dprev) in zip(path, [path[-1]] + path[:-1]) if d != dprev]
        loops.append(loop)
    return loops


def _signed_area2(loop) -> int:
    s = 0
    for (x1, y1), (x2, y2) in zip(loop, loop[1:] + loop[:1]):
        s += x1 * y2 - x2 * y1
    return s


def _slab_rectangles(cells: set[tuple[int, int]]):
    """Split a cell set into row-merged rectangles (fallback for holes)."""
    rows = sorted({r for r, _ in cells})
    row_runs = {}
    for r in rows:
        cols = sorted(c for rr, c in cells if rr == r)
        runs = []
        start = prev = cols[0]
        for c in cols[1:]:
            if c == prev + 1:
                prev = c
            else:
                runs.append((start, prev))
                start = prev = c
        runs.append((start, prev))
        row_runs[r] = runs

    rects = []
    i = 0
    while i < len(rows):
        j = i
        while (
            j + 1 < len(rows)
            and rows[j + 1] == rows[j] + 1
            and row_runs[rows[j + 1]] == row_runs[rows[i]]
        ):
            j += 1
        for c1, c2 in row_runs[rows[i]]:
            rects.append((rows[i], rows[j], c1, c2))
        i = j + 1
    return rects


def reconstruct_layout(squish: SquishPattern) -> LayoutPattern:
    """Decode a squish pattern back into polygons.

    Each 4-connected component of 1-cells becomes one counterclockwise
    boundary polygon.  Components that pinch at a corner split into several
    simple polygons; components with holes fall back to a row-merged
    rectangle decomposition (the covered area is preserved in every case).
    """
    _validate_squish(squish)
    topo = np.asarray(squish.topology, dtype=np.uint8)
    xs = np.concatenate(([0], np.cumsum(squish.delta_x)))
    ys = np.concatenate(([0], np.cumsum(squish.delta_y)))

    labels, count = ndimage.label(topo)
    polygons: list[Polygon] = []
    for lab in range(1, count + 1):
        rr, cc = np.nonzero(labels == lab)
        cells = set(zip(rr.tolist(), cc.tolist()))
        loops = _trace_loops(cells)
        if any(_signed_area2(loop) < 0 for loop in loops):
            for r1, r2, c1, c2 in _slab_rectangles(cells):
                x1, x2 = int(xs[c1]), int(xs[c2 + 1])
                y1, y2 = int(ys[r1]), int(ys[r2 + 1])
                polygons.append([(x1, y1), (x2, y1), (x2, y2), (x1, y2)])
        else:
            for loop in loops:
                polygons.append([(int(xs[i]), int(ys[j])) for i, j in loop])

    return LayoutPattern(window=(int(xs[-1]), int(ys[-1])), polygons=polygons)


def pad_to_square(squish: SquishPattern, side: int) -> SquishPattern:
    """Pad the topology to side x side by splitting scan-line intervals.

    The largest interval on the deficient axis is split in half (ties go to
    the lowest index; odd lengths split ceil/floor) and the corresponding
    topology row or column is duplicated, so the decoded geometry is
    unchanged.
    """
    _validate_squish(squish)
    topo = np.asarray(squish.topology, dtype=np.uint8)
    ny, nx = topo.shape
    if nx > side or ny > side:
        raise CapacityError(f"topology {ny}x{nx} exceeds requested side {side}")

    def grow(topo: np.ndarray, delta: np.ndarray, axis: int) -> tuple[np.ndarray, np.ndarray]:
        delta = list(np.asarray(delta, dtype=np.int64))
        while len(delta) < side:
            i = int(np.argmax(delta))  # argmax takes the lowest index on ties
            d = delta[i]
            if d < 2:
                raise CapacityError(
                    f"cannot split a {d} nm interval; window too small for side {side}"
                )
            delta[i : i + 1] = [d - d // 2, d // 2]
            dup = topo.take([i], axis=axis)
            topo = np.concatenate([topo.take(range(i), axis=axis), dup, topo.take(range(i, topo.shape[axis]), axis=axis)], axis=axis)
        return topo, np.asarray(delta, dtype=np.int64)

    topo, dx = grow(topo, squish.delta_x, axis=1)
    topo, dy = grow(topo, squish.delta_y, axis=0)
    return SquishPattern(topology=topo, delta_x=dx, delta_y=dy)


def remove_redundant_lines(squish: SquishPattern) -> SquishPattern:
    """Merge adjacent identical rows/columns, summing their deltas.

    The result is the canonical minimal squish pattern for the geometry;
    padding inserted by pad_to_square is undone exactly.
    """
    _validate_squish(squish)
    topo = np.asarray(squish.topology, dtype=np.uint8)

    def merge(topo, delta, axis):
        n = topo.shape[axis]
        keep = [0]
        sums = [int(delta[0])]
        for i in range(1, n):
            a = topo.take(i, axis=axis)
            b = topo.take(keep[-1], axis=axis)
            if np.array_equal(a, b):
                sums[-1] += int(delta[i])
            else:
                keep.append(i)
                sums.append(int(delta[i]))
        return topo.take(keep, axis=axis), np.asarray(sums, dtype=np.int64)

    topo, dy = merge(topo, squish.delta_y, axis=0)
    topo, dx = merge(topo, squish.delta_x, axis=1)
    return SquishPattern(topology=topo, delta_x=dx, delta_y=dy)


def complexity(squish: SquishPattern) -> Complexity:
    """Scan-line counts minus one per axis, on the canonical pattern.

    A pattern with no shapes has complexity (0, 0): it contributes no scan
    lines of its own.
    """
    canon = remove_redundant_lines(squish)
    if not canon.topology.any():
        return Complexity(0, 0)
    ny, nx = canon.topology.shape
    return Complexity(nx, ny)


def fold(matrix: np.ndarray, channels: int) -> np.ndarray:
    """Fold a binary matrix into a (C, M, M) tensor.

    Channel c of cell (u, v) is matrix[u*s + c // s, v*s + c % s] with
    s = sqrt(C): each s x s patch maps row-major onto the channel axis.
    """
    matrix = np.asarray(matrix)
    s = int(round(channels**0.5))
    if s * s != channels or channels < 1:
        raise ShapeError(f"channel count {channels} is not a perfect square")
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {matrix.shape}")
    if matrix.shape[0] % s != 0:
        raise ShapeError(f"matrix side {matrix.shape[0]} not divisible by sqrt(C)={s}")
    m = matrix.shape[0] // s
    return (
        matrix.reshape(m, s, m, s).transpose(1, 3, 0, 2).reshape(channels, m, m).copy()
    )


def unfold(tensor: np.ndarray) -> np.ndarray:
    """Inverse of fold: unfold(fold(X, C)) == X exactly."""
    tensor = np.asarray(tensor)
    if tensor.ndim != 3 or tensor.shape[1] != tensor.shape[2]:
        raise ShapeError(f"expected a (C, M, M) tensor, got shape {tensor.shape}")
    channels, m = tensor.shape[0], tensor.shape[1]
    s = int(round(channels**0.5))
    if s * s != channels:
        raise ShapeError(f"channel count {channels} is not a perfect square")
    return (
        tensor.reshape(s, s, m, m).transpose(2, 0, 3, 1).reshape(s * m, s * m).copy()
    )
