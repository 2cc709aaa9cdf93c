import numpy as np
import pytest

from squishgen import (
    LayoutPattern,
    RuleSet,
    SquishPattern,
    check_drc,
    diversity,
    extract_squish,
    legality_rate,
    reconstruct_layout,
    solve,
)
from squishgen.errors import InfeasibleError, ParameterError
from squishgen.synthetic import random_topology

RULES = RuleSet(space_min=100, width_min=100, area_min=1, area_max=10**7, window=1000)


def rect(x1, y1, x2, y2):
    return [(x1, y1), (x2, y1), (x2, y2), (x1, y2)]


class TestSpace:
    def test_horizontal_gap_violation(self):
        p = LayoutPattern((1000, 1000), [rect(0, 0, 200, 300), rect(280, 0, 500, 300)])
        v = check_drc(p, RULES)
        assert len(v) == 1
        assert v[0].kind == "space" and v[0].measured == 80 and v[0].axis == "x"
        assert v[0].polygons == (0, 1)

    def test_vertical_gap_violation(self):
        p = LayoutPattern((1000, 1000), [rect(0, 0, 300, 200), rect(0, 280, 300, 500)])
        v = check_drc(p, RULES)
        assert [x.kind for x in v] == ["space"]
        assert v[0].axis == "y" and v[0].measured == 80

    def test_wide_gap_clean(self):
        p = LayoutPattern((1000, 1000), [rect(0, 0, 200, 300), rect(300, 0, 500, 300)])
        assert check_drc(p, RULES) == []

    def test_no_projection_overlap_not_checked(self):
        # diagonal placement: projections do not overlap on either axis
        p = LayoutPattern((1000, 1000), [rect(0, 0, 200, 200), rect(250, 250, 450, 450)])
        assert check_drc(p, RULES) == []

    def test_corner_touch_not_a_space_violation(self):
        p = LayoutPattern((1000, 1000), [rect(0, 0, 200, 200), rect(200, 200, 400, 400)])
        assert check_drc(p, RULES) == []

    def test_symmetric_reported_once(self):
        p = LayoutPattern((1000, 1000), [rect(0, 0, 200, 300), rect(280, 0, 500, 300)])
        v = check_drc(p, RULES)
        assert len([x for x in v if x.kind == "space"]) == 1
        p2 = LayoutPattern((1000, 1000), list(reversed(p.polygons)))
        v2 = check_drc(p2, RULES)
        assert len([x for x in v2 if x.kind == "space"]) == 1
        assert v2[0].measured == v[0].measured

    def test_notch_within_one_polygon_unchecked(self):
        # U-shape with a 60 nm notch: same-polygon spacing is out of scope
        u = [(0, 0), (500, 0), (500, 400), (280, 400), (280, 150), (220, 150), (220, 400), (0, 400)]
        p = LayoutPattern((1000, 1000), [u])
        assert [v.kind for v in check_drc(p, RULES)] == []


class TestWidth:
    def test_thin_rectangle(self):
        p = LayoutPattern((1000, 1000), [rect(0, 0, 90, 500)])
        v = check_drc(p, RULES)
        assert len(v) == 1
        assert v[0].kind == "width" and v[0].measured == 90 and v[0].axis == "x"

    def test_thin_horizontal(self):
        p = LayoutPattern((1000, 1000), [rect(0, 0, 500, 90)])
        v = check_drc(p, RULES)
        assert v[0].axis == "y" and v[0].measured == 90

    def test_l_shape_arm_width(self):
        # L whose vertical arm is only 80 nm wide
        l = [(0, 0), (400, 0), (400, 120), (80, 120), (80, 500), (0, 500)]
        p = LayoutPattern((1000, 1000), [l])
        v = [x for x in check_drc(p, RULES) if x.kind == "width"]
        assert any(x.axis == "x" and x.measured == 80 for x in v)


class TestArea:
    def test_too_small(self):
        rules = RuleSet(space_min=10, width_min=10, area_min=10**5, area_max=10**6, window=1000)
        p = LayoutPattern((1000, 1000), [rect(0, 0, 100, 100)])
        v = check_drc(p, rules)
        assert [x.kind for x in v] == ["area"]
        assert v[0].measured == 10**4 and v[0].limit == 10**5

    def test_too_large(self):
        rules = RuleSet(space_min=10, width_min=10, area_min=10, area_max=10**4, window=1000)
        p = LayoutPattern((1000, 1000), [rect(0, 0, 200, 200)])
        v = check_drc(p, rules)
        assert v[0].kind == "area" and v[0].measured == 4 * 10**4 and v[0].limit == 10**4

    def test_l_shape_area_exact(self):
        rules = RuleSet(space_min=10, width_min=10, area_min=1, area_max=10**5, window=1000)
        l = [(0, 0), (400, 0), (400, 120), (120, 120), (120, 500), (0, 500)]
        p = LayoutPattern((1000, 1000), [l])
        v = [x for x in check_drc(p, rules) if x.kind == "area"]
        # area = 400*120 + 120*380 = 93600 <= 1e5: clean
        assert v == []


class TestInvariances:
    def test_translation_invariance(self):
        base = [rect(100, 100, 290, 300), rect(370, 100, 600, 300)]
        moved = [[(x + 50, y + 200) for x, y in poly] for poly in base]
        va = check_drc(LayoutPattern((1000, 1000), base), RULES)
        vb = check_drc(LayoutPattern((1000, 1000), moved), RULES)
        assert [(v.kind, v.axis, v.measured) for v in va] == [
            (v.kind, v.axis, v.measured) for v in vb
        ]

    def test_transposition_symmetry(self):
        base = [rect(0, 0, 200, 300), rect(280, 0, 500, 300)]
        flipped = [[(y, x) for x, y in poly] for poly in base]
        va = check_drc(LayoutPattern((1000, 1000), base), RULES)
        vb = check_drc(LayoutPattern((1000, 1000), flipped), RULES)
        swap = {"x": "y", "y": "x", None: None}
        assert sorted((v.kind, swap[v.axis], v.measured) for v in va) == sorted(
            (v.kind, v.axis, v.measured) for v in vb
        )

    def test_empty_pattern_legal(self):
        rules = RuleSet(space_min=10, width_min=10, area_min=100, area_max=200, window=1000)
        assert check_drc(LayoutPattern((1000, 1000), []), rules) == []


class TestCrossModuleAgreement:
    def test_legalizer_output_is_drc_clean(self, rules_2048):
        gen = np.random.default_rng(12)
        checked = 0
        for i in range(150):
            topo = random_topology(8, gen)
            try:
                sol = solve(topo, rules_2048, seed=i)
            except InfeasibleError:
                continue
            pattern = reconstruct_layout(SquishPattern(topo, sol.delta_x, sol.delta_y))
            assert check_drc(pattern, rules_2048) == [], f"topology {i}"
            checked += 1
        assert checked >= 100

    def test_oracle_independence(self):
        # the checker must not reuse the legalizer's constraint extraction
        import ast
        import squishgen.drc as drc_module

        tree = ast.parse(open(drc_module.__file__).read())
        imported = set()
        for node in ast.walk(tree):
            if isinstance(node, ast.ImportFrom) and node.module and "legalize" in node.module:
                imported |= {alias.name for alias in node.names}
        assert "extract_constraints" not in imported
        assert imported <= {"RuleSet"}


class TestLegalityRate:
    def test_counts_defects(self):
        good = [LayoutPattern((1000, 1000), [rect(0, 0, 200, 300)]) for _ in range(9)]
        bad = LayoutPattern((1000, 1000), [rect(0, 0, 200, 300), rect(280, 0, 500, 300)])
        assert legality_rate(good + [bad], RULES) == 0.9

    def test_all_clean(self):
        ps = [LayoutPattern((1000, 1000), [rect(0, 0, 200, 300)])]
        assert legality_rate(ps, RULES) == 1.0

    def test_empty_list_rejected(self):
        with pytest.raises(ParameterError):
            legality_rate([], RULES)


class TestDiversity:
    def _pattern_with_complexity(self, c):
        # 1 x c alternating topology: canonical, complexity (c, 1)
        topo = np.array([[i % 2 for i in range(c)]], np.uint8)
        dx = np.full(c, 1, np.int64)
        return SquishPattern(topo, dx, np.array([c], np.int64))

    def test_point_mass_zero_bits(self):
        ps = [self._pattern_with_complexity(3)] * 5
        report = diversity(ps)
        assert report.entropy_bits == 0.0
        assert report.pattern_count == 5

    def test_uniform_four_bins(self):
        ps = [self._pattern_with_complexity(c) for c in (2, 3, 4, 5)]
        assert diversity(ps).entropy_bits == 2.0

    def test_half_quarter_quarter(self):
        ps = [
            self._pattern_with_complexity(2),
            self._pattern_with_complexity(2),
            self._pattern_with_complexity(3),
            self._pattern_with_complexity(4),
        ]
        report = diversity(ps)
        assert abs(report.entropy_bits - 1.5) < 1e-12
        assert report.histogram[(2, 1)] == 0.5

    def test_histogram_probabilities_sum_to_one(self):
        gen = np.random.default_rng(13)
        ps = [self._pattern_with_complexity(int(gen.integers(2, 9))) for _ in range(40)]
        report = diversity(ps)
        assert abs(sum(report.histogram.values()) - 1.0) < 1e-9
        occupied = len(report.histogram)
        assert 0.0 <= report.entropy_bits <= np.log2(occupied) + 1e-12

    def test_empty_rejected(self):
        with pytest.raises(ParameterError):
            diversity([])

    def test_layout_derived_complexity(self):
        p = LayoutPattern((2048, 2048), [rect(500, 600, 800, 1000)])
        report = diversity([extract_squish(p)])
        assert report.histogram == {(3, 3): 1.0}
