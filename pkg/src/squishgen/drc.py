"""Design-rule checking and library metrics.

The checker works directly on polygon geometry (facing-edge gaps, per-axis
chord widths from a rectilinear slicing, shoelace areas) and shares no
constraint code with the legalizer: agreement between the two is a tested
property, not a construction.  Also computes the complexity-histogram
diversity metric (Shannon entropy, base 2).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .legalize import RuleSet
from .squish import LayoutPattern, SquishPattern, complexity, validate_layout


@dataclass(frozen=True)
class Violation:
    kind: str  # "space" | "width" | "area"
    polygons: tuple[int, ...]
    axis: str | None  # "x"/"y" for space and width, None for area
    measured: int  # nm for space/width, nm^2 for area
    limit: int


@dataclass(frozen=True)
class DiversityReport:
    histogram: dict[tuple[int, int], float]
    entropy_bits: float
    pattern_count: int


def _signed_area2(poly) -> int:
    s = 0
    for (x1, y1), (x2, y2) in zip(poly, poly[1:] + poly[:1]):
        s += x1 * y2 - x2 * y1
    return s


def _ccw(poly):
    return list(poly) if _signed_area2(list(poly)) > 0 else list(poly)[::-1]


def _directed_edges(poly):
    return list(zip(poly, poly[1:] + poly[:1]))


def _chords(poly, axis: str) -> list[int]:
    """Material interval lengths along `axis`, one slab per vertex coordinate.

    For axis 'x' the polygon is sliced between consecutive distinct vertex
    y's and the crossings of vertical edges at the slab centre bound the
    horizontal chords; axis 'y' is symmetric.
    """
    if axis == "x":
        cuts = sorted({y for _, y in poly})
        edges = [
            (x1, *sorted((y1, y2)))
            for (x1, y1), (x2, y2) in _directed_edges(poly)
            if x1 == x2
        ]
    else:
        cuts = sorted({x for x, _ in poly})
        edges = [
            (y1, *sorted((x1, x2)))
            for (x1, y1), (x2, y2) in _directed_edges(poly)
            if y1 == y2
        ]
    chords = []
    for lo, hi in zip(cuts, cuts[1:]):
        mid2 = lo + hi  # doubled slab centre, exact in integers
        crossings = sorted(c for c, u, v in edges if 2 * u < mid2 < 2 * v)
        chords.extend(b - a for a, b in zip(crossings[0::2], crossings[1::2]))
    return chords


def _facing_edges(poly):
    """Vertical and horizontal edges keyed by the outward direction they face.

    CCW orientation keeps the interior on the left: an upward edge faces +x,
    a downward edge -x, a rightward edge -y, a leftward edge +y.
    """
    faces = {"+x": [], "-x": [], "+y": [], "-y": []}
    for (x1, y1), (x2, y2) in _directed_edges(poly):
        if x1 == x2:
            key = "+x" if y2 > y1 else "-x"
            faces[key].append((x1, min(y1, y2), max(y1, y2)))
        else:
            key = "-y" if x2 > x1 else "+y"
            faces[key].append((y1, min(x1, x2), max(x1, x2)))
    return faces


def _min_gap(faces_p, faces_q, axis: str) -> int | None:
    """Minimum positive facing gap along `axis` with overlapping projections.

    Abutting edges (gap 0) are treated as merged contact, not a spacing
    violation.
    """
    lo, hi = ("+x", "-x") if axis == "x" else ("+y", "-y")
    best = None
    for near, far in ((faces_p[lo], faces_q[hi]), (faces_q[lo], faces_p[hi])):
        for c1, u1, v1 in near:
            for c2, u2, v2 in far:
                if c2 > c1 and min(v1, v2) > max(u1, u2):
                    gap = c2 - c1
                    if best is None or gap < best:
                        best = gap
    return best


def check_drc(pattern: LayoutPattern, rules: RuleSet) -> list[Violation]:
    """All space/width/area violations of a concrete layout (empty = legal)."""
    validate_layout(pattern)
    polys = [_ccw(p) for p in pattern.polygons]
    violations: list[Violation] = []

    for pi, poly in enumerate(polys):
        area = _signed_area2(poly) // 2
        if not rules.area_min <= area <= rules.area_max:
            violations.append(
                Violation(
                    "area",
                    (pi,),
                    None,
                    area,
                    rules.area_min if area < rules.area_min else rules.area_max,
                )
            )
        for axis in ("x", "y"):
            chords = _chords(poly, axis)
            bad = [c for c in chords if c < rules.width_min]
            if bad:
                violations.append(
                    Violation("width", (pi,), axis, min(bad), rules.width_min)
                )

    faces = [_facing_edges(p) for p in polys]
    for pi in range(len(polys)):
        for qi in range(pi + 1, len(polys)):
            for axis in ("x", "y"):
                gap = _min_gap(faces[pi], faces[qi], axis)
                if gap is not None and gap < rules.space_min:
                    violations.append(
                        Violation("space", (pi, qi), axis, gap, rules.space_min)
                    )
    return violations


def legality_rate(patterns: list[LayoutPattern], rules: RuleSet) -> float:
    """Fraction of patterns with an empty violation list."""
    if not patterns:
        raise ParameterError("legality_rate needs a non-empty pattern list")
    clean = sum(1 for p in patterns if not check_drc(p, rules))
    return clean / len(patterns)


def diversity(patterns: list[SquishPattern]) -> DiversityReport:
    """Shannon entropy (bits) of the complexity histogram of a library."""
    if not patterns:
        raise ParameterError("diversity needs a non-empty pattern list")
    counts = Counter(tuple(complexity(p)) for p in patterns)
    total = sum(counts.values())
    histogram = {bin_: c / total for bin_, c in sorted(counts.items())}
    probs = np.array(list(histogram.values()))
    entropy = float(-(probs * np.log2(probs)).sum())
    return DiversityReport(histogram=histogram, entropy_bits=entropy, pattern_count=total)
