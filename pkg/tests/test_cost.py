"""Local repair costs: exhaustive tables, certified repairs, dot analytics."""

from collections import deque
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conntest.cost import (AnalyticDotCost, BruteForceCost, CostUnavailable,
                           PatternViolation, TooLarge, connectify_via_grid,
                           dot_local_cost, exact_dist_border_connected,
                           exact_dist_connected, mod3_border_fix,
                           nearest_border_connected, structural_audit)
from conntest.geometry import LevelGeometry, SquareRef, enumerate_squares, level_side
from conntest.image import Image, connected_components
from conntest.instances import gen_dot_far


def square_ref(k: int, origin=(0, 0), level: int = 0,
               eps=Fraction(1, 2)) -> SquareRef:
    geo = LevelGeometry(eps=Fraction(eps), level=level, k=k, pitch=k + 1,
                        squares_per_row=1)
    return SquareRef(geometry=geo, origin=origin)


def bits_of_code(code: int, side: int) -> np.ndarray:
    flat = np.array([(code >> b) & 1 for b in range(side * side)], dtype=bool)
    return flat.reshape(side, side)


def naive_distances(side: int, target: str) -> list:
    """Multi-source BFS over the flip graph, validity judged per content."""
    cells = side * side
    valid = []
    for code in range(1 << cells):
        lab = connected_components(Image(bits_of_code(code, side)))
        if target == "border":
            valid.append(bool(lab.touches_border.all()))
        else:
            valid.append(lab.count <= 1)
    dist = [-1] * (1 << cells)
    queue = deque()
    for code, ok in enumerate(valid):
        if ok:
            dist[code] = 0
            queue.append(code)
    while queue:
        code = queue.popleft()
        for b in range(cells):
            nxt = code ^ (1 << b)
            if dist[nxt] < 0:
                dist[nxt] = dist[code] + 1
                queue.append(nxt)
    return dist


class TestExactDistance:
    def test_side_one(self):
        assert exact_dist_border_connected([[False]]) == 0
        assert exact_dist_border_connected([[True]]) == 0
        assert exact_dist_connected([[True]]) == 0

    def test_side_two_border_always_zero(self):
        for code in range(16):
            assert exact_dist_border_connected(bits_of_code(code, 2)) == 0

    def test_side_two_connected(self):
        diag = np.array([[True, False], [False, True]])
        assert exact_dist_connected(diag) == 1
        assert exact_dist_connected(np.zeros((2, 2), dtype=bool)) == 0

    def test_isolated_center(self):
        sub = np.zeros((3, 3), dtype=bool)
        sub[1, 1] = True
        assert exact_dist_border_connected(sub) == 1

    def test_center_plus_corner(self):
        sub = np.zeros((3, 3), dtype=bool)
        sub[1, 1] = True
        sub[0, 0] = True
        assert exact_dist_border_connected(sub) == 1

    def test_matches_naive_bfs_side_3(self):
        for target, fn in (("border", exact_dist_border_connected),
                           ("connected", exact_dist_connected)):
            want = naive_distances(3, target)
            for code in range(512):
                assert fn(bits_of_code(code, 3)) == want[code]

    def test_symmetry_side_4(self):
        gen = np.random.Generator(np.random.PCG64(7))
        for _ in range(50):
            sub = gen.random((4, 4)) < 0.5
            d = exact_dist_border_connected(sub)
            assert exact_dist_border_connected(sub.T) == d
            assert exact_dist_border_connected(np.rot90(sub)) == d
            assert exact_dist_border_connected(sub[::-1]) == d

    def test_too_large(self):
        with pytest.raises(TooLarge):
            exact_dist_border_connected(np.zeros((5, 5), dtype=bool))


class TestNearestRepair:
    def test_repair_is_valid_and_minimal(self):
        gen = np.random.Generator(np.random.PCG64(11))
        for side in (2, 3, 4):
            for _ in range(60):
                sub = gen.random((side, side)) < gen.uniform(0.2, 0.8)
                fixed = nearest_border_connected(sub)
                assert connected_components(fixed).touches_border.all()
                flips = int((fixed.bits != sub).sum())
                assert flips == exact_dist_border_connected(sub)

    def test_valid_input_unchanged(self):
        sub = np.zeros((3, 3), dtype=bool)
        sub[0, 1] = True
        fixed = nearest_border_connected(sub)
        assert np.array_equal(fixed.bits, sub)

    def test_too_large(self):
        with pytest.raises(TooLarge):
            nearest_border_connected(np.zeros((5, 5), dtype=bool))


class TestMod3Repair:
    def test_sparse_branch_whitens(self):
        sub = np.zeros((8, 8), dtype=bool)
        sub[3, 3] = sub[5, 6] = True
        fixed, cost = mod3_border_fix(sub)
        assert cost == 2
        assert not fixed.bits.any()

    def test_dense_branch_connects(self):
        gen = np.random.Generator(np.random.PCG64(23))
        for side in (5, 9, 16):
            for _ in range(20):
                sub = gen.random((side, side)) < 0.6
                fixed, cost = mod3_border_fix(sub)
                assert connected_components(fixed).touches_border.all()
                assert int((fixed.bits != sub).sum()) == cost

    @settings(max_examples=80, deadline=None)
    @given(st.integers(1, 12), st.integers(0, 2 ** 32 - 1))
    def test_cost_within_quarter_area(self, side, seed):
        gen = np.random.Generator(np.random.PCG64(seed))
        sub = gen.random((side, side)) < gen.uniform(0.0, 1.0)
        _, cost = mod3_border_fix(sub)
        assert cost <= -(-side * side // 4)


class TestConnectify:
    def test_connected_input_is_free(self):
        img = Image.blank(17).with_pixel(4, 4, True).with_pixel(4, 5, True)
        out, cost = connectify_via_grid(img, Fraction(1, 2))
        assert cost == 0
        assert out is img

    def test_disconnected_input(self):
        img = Image.blank(17).with_pixel(3, 3, True).with_pixel(12, 12, True)
        out, cost = connectify_via_grid(img, Fraction(1, 2))
        assert connected_components(out).count == 1
        assert cost >= 1
        assert int((out.bits != img.bits).sum()) == cost

    def test_cost_dominates_component_lower_bound(self):
        gen = np.random.Generator(np.random.PCG64(31))
        for _ in range(10):
            bits = gen.random((33, 33)) < 0.08
            img = Image(bits)
            out, cost = connectify_via_grid(img, Fraction(1, 4))
            assert connected_components(out).count <= 1
            c = connected_components(img).count
            assert Fraction(max(c - 1, 0), 3) <= cost


class TestDotPattern:
    def test_counts_dots(self):
        sub = np.zeros((9, 9), dtype=bool)
        for x, y in ((2, 2), (5, 5), (2, 6)):
            sub[y, x] = True
        assert dot_local_cost(sub) == 3

    def test_empty_square(self):
        assert dot_local_cost(np.zeros((9, 9), dtype=bool)) == 0

    def test_boundary_clearance_enforced(self):
        sub = np.zeros((9, 9), dtype=bool)
        sub[4, 1] = True
        with pytest.raises(PatternViolation):
            dot_local_cost(sub)

    def test_chebyshev_spacing_enforced(self):
        sub = np.zeros((9, 9), dtype=bool)
        sub[2, 2] = True
        sub[4, 4] = True
        with pytest.raises(PatternViolation):
            dot_local_cost(sub)
        sub2 = np.zeros((9, 9), dtype=bool)
        sub2[2, 2] = True
        sub2[2, 3] = True
        with pytest.raises(PatternViolation):
            dot_local_cost(sub2)


class TestBruteForceCost:
    def test_local_cost_reads_square_interior(self):
        img = Image.blank(5).with_pixel(2, 2, True)
        cost = BruteForceCost(img)
        assert cost.local_cost(square_ref(3)) == 1

    def test_large_square_unavailable(self):
        cost = BruteForceCost(Image.blank(9))
        with pytest.raises(CostUnavailable):
            cost.local_cost(square_ref(7))


DOTS_33 = ((3, 3), (11, 11), (19, 5), (27, 21), (5, 27))


def dot_image_33() -> Image:
    bits = np.zeros((33, 33), dtype=bool)
    for x, y in DOTS_33:
        bits[y, x] = True
    return Image(bits)


class TestAnalyticDotCost:
    def test_level_costs_frozen(self):
        cost = AnalyticDotCost.from_image(dot_image_33(), Fraction(1, 4))
        assert cost.level_costs(0).tolist() == [2, 1, 1, 1]
        lvl1 = cost.level_costs(1).tolist()
        assert sum(lvl1) == 5
        assert lvl1[0] == 1 and lvl1[5] == 1 and lvl1[2] == 1
        assert lvl1[11] == 1 and lvl1[12] == 1

    def test_nesting_identity(self):
        cost = AnalyticDotCost.from_image(dot_image_33(), Fraction(1, 4))
        fine = cost.level_costs(1).reshape(2, 2, 2, 2)
        coarse = cost.level_costs(0).reshape(2, 2)
        assert np.array_equal(fine.sum(axis=(1, 3)), coarse)

    def test_matches_per_square_dot_count(self):
        img = dot_image_33()
        cost = AnalyticDotCost.from_image(img, Fraction(1, 4))
        for level in (0, 1):
            k = level_side(Fraction(1, 4), level)
            for square in enumerate_squares(33, Fraction(1, 4), level):
                u, v = square.origin
                sub = img.bits[v + 1:v + 1 + k, u + 1:u + 1 + k]
                assert cost.local_cost(square) == dot_local_cost(sub)

    def test_grid_line_clearance(self):
        bits = np.zeros((33, 33), dtype=bool)
        bits[3, 8] = True
        cost = AnalyticDotCost.from_image(Image(bits), Fraction(1, 4))
        assert cost.level_costs(0).sum() == 1
        with pytest.raises(CostUnavailable):
            cost.level_costs(1)

    def test_invalid_pattern_rejected_on_construction(self):
        with pytest.raises(PatternViolation):
            AnalyticDotCost([3, 5], [3, 4], 33, Fraction(1, 4))

    def test_generated_instance_validates(self):
        inst = gen_dot_far(257, Fraction(1, 16), seed=5, placement="blocks",
                           count=40)
        cost = AnalyticDotCost.from_image(inst.image, Fraction(1, 16))
        total = sum(int(cost.level_costs(i).sum()) for i in range(4))
        assert total == 4 * inst.count


class _StubProvider:
    provenance = "stub"

    def __init__(self, per_level):
        self.per_level = per_level

    def level_costs(self, level):
        return np.asarray(self.per_level[level])


class TestStructuralAudit:
    def test_small_dot_instance(self):
        cost = AnalyticDotCost.from_image(dot_image_33(), Fraction(1, 4))
        report = structural_audit(33, Fraction(1, 4), cost)
        assert report.total == 10
        assert report.threshold == Fraction(1089, 8)
        assert not report.passes
        assert report.provenance == "analytic"
        assert [row["level"] for row in report.per_level] == [0, 1]
        assert [row["elcSum"] for row in report.per_level] == [5, 5]

    def test_pass_and_near_flags(self):
        report = structural_audit(9, Fraction(1, 2), _StubProvider([[14, 7]]))
        assert report.passes and not report.near_threshold
        report = structural_audit(9, Fraction(1, 2), _StubProvider([[14, 6]]))
        assert not report.passes and report.near_threshold

    def test_cost_capped_at_twice_side(self):
        report = structural_audit(9, Fraction(1, 2), _StubProvider([[100]]))
        assert report.total == 14
