"""Hard instance distribution and the query-counting game on windows."""

from fractions import Fraction

import numpy as np
import pytest

from conntest.hardlb import (HardMeta, InvalidParams, canonical_queries,
                             classify_windows, farness_audit, make_hard_params,
                             measure_cstar, render_hard,
                             revealing_probability_exact,
                             revealing_probability_mc, sample_hard,
                             strategy_bridges, strategy_grid, strategy_uniform)
from conntest.image import connected_components

EPS16 = Fraction(1, 2 ** 16)


def params_512():
    return make_hard_params(512, EPS16)


def block_queries(side: int):
    ax = np.arange(side)
    gx, gy = np.meshgrid(ax, ax)
    return gx.ravel(), gy.ravel()


class TestParams:
    def test_reference_constants(self):
        p = params_512()
        assert (p.lo, p.hi) == (2, 4)
        assert p.canvas_side == 513
        rows = [
            (lv.index, lv.a, lv.window_side, lv.windows_per_row,
             lv.cells_per_window_row, lv.bridges_per_square)
            for lv in p.levels
        ]
        assert rows == [
            (2, 4, 128, 4, 32, 1),
            (3, 8, 256, 2, 32, 3),
            (4, 16, 512, 1, 32, 7),
        ]
        for lv in p.levels:
            assert lv.black_cells_per_window == 512
            assert lv.bridge_squares_per_window == 496
        assert p.level(3) is p.levels[1]

    def test_rejects_non_power_of_two_side(self):
        with pytest.raises(InvalidParams, match="power of 2"):
            make_hard_params(500, EPS16)

    def test_rejects_eps_not_power_of_two(self):
        with pytest.raises(InvalidParams) as err:
            make_hard_params(100, Fraction(1, 3))
        msg = str(err.value)
        assert "n = 100" in msg and "1/eps" in msg

    def test_rejects_log_eps_not_multiple_of_8(self):
        with pytest.raises(InvalidParams, match="multiple of 8"):
            make_hard_params(512, Fraction(1, 2 ** 12))

    def test_rejects_single_level_scale(self):
        with pytest.raises(InvalidParams):
            make_hard_params(512, Fraction(1, 2 ** 8))

    def test_rejects_side_too_small_for_eps(self):
        with pytest.raises(InvalidParams):
            make_hard_params(64, EPS16)
        assert make_hard_params(128, EPS16).n == 128


EXPECTED_BLACK = {2: 9808, 3: 43440, 4: 183664}


class TestRender:
    @pytest.mark.parametrize("level", [2, 3, 4])
    def test_render_structure(self, level):
        p = params_512()
        lv = p.level(level)
        rng = np.random.Generator(np.random.PCG64(41 + level))
        window = int(rng.integers(0, lv.window_count))
        disc = rng.integers(0, lv.a,
                            size=(lv.bridge_squares_per_window,
                                  lv.bridges_per_square))
        meta = HardMeta(params=p, level=level, window_index=window,
                        disc_offsets=disc)
        img = render_hard(meta)
        assert img.side == 513
        assert int(img.bits.sum()) == EXPECTED_BLACK[level]

        wx, wy = meta.window_origin
        side = lv.window_side
        assert img.bits[wy:wy + side, wx + side].all()
        assert not img.bits[:wy, :].any()

        a = lv.a
        cells = lv.cells_per_window_row
        sq = 0
        for r in range(cells):
            for c in range(cells):
                if (r + c) % 2 == 0 or c == 0:
                    continue
                x0, y0 = wx + c * a, wy + r * a
                for k in range(lv.bridges_per_square):
                    row = img.bits[y0 + 2 * k + 1, x0:x0 + a]
                    assert int(row.sum()) == a - 1
                    assert not row[int(disc[sq, k])]
                sq += 1
        assert sq == 496

    def test_component_count(self):
        p = params_512()
        for seed in range(5):
            img, meta = sample_hard(p, seed)
            lab = connected_components(img)
            assert lab.count == 497, (seed, meta.level)

    def test_farness(self):
        p = params_512()
        img, _ = sample_hard(p, 3)
        audit = farness_audit(img, EPS16, area_side=512)
        assert audit["componentCount"] == 497
        assert audit["distanceLowerBound"] == Fraction(496, 3)
        assert audit["epsArea"] == 4
        assert audit["isEpsFar"]

    def test_sampling_is_deterministic(self):
        p = params_512()
        a, ma = sample_hard(p, 12)
        b, mb = sample_hard(p, 12)
        assert np.array_equal(a.bits, b.bits)
        assert ma.level == mb.level and ma.window_index == mb.window_index


class TestFarnessAudit:
    def test_blank_image(self):
        audit = farness_audit(np.zeros((8, 8), dtype=bool), Fraction(1, 4))
        assert audit["componentCount"] == 0
        assert audit["distanceLowerBound"] == 0
        assert not audit["isEpsFar"]

    def test_two_components(self):
        bits = np.zeros((8, 8), dtype=bool)
        bits[1, 1] = bits[6, 6] = True
        audit = farness_audit(bits, Fraction(1, 64))
        assert audit["componentCount"] == 2
        assert audit["distanceLowerBound"] == Fraction(1, 3)
        assert not audit["isEpsFar"]


class TestCanonicalQueries:
    def test_deduplicates(self):
        qx, qy = canonical_queries([0, 0, 5], [0, 0, 7], 513)
        assert len(qx) == 2
        assert sorted(zip(qx.tolist(), qy.tolist())) == [(0, 0), (5, 7)]

    def test_bounds_checked(self):
        with pytest.raises(ValueError):
            canonical_queries([513], [0], 513)
        with pytest.raises(ValueError):
            canonical_queries([0], [-1], 513)
        with pytest.raises(ValueError):
            canonical_queries([0, 1], [0], 513)


class TestGameOnBlockQuery:
    """A full 16x16 block at the origin, worked through by hand.

    Level 2 covers the six bridge squares of window 0 entirely, level 3 one,
    level 4 none, so the reveal probability is (1/3)(1/16 + 1/4 + 0)."""

    def test_window_stats(self):
        p = params_512()
        stats = classify_windows(p, *block_queries(16))
        assert stats.q == 256
        assert [row["coveredCells"] for row in stats.per_level] == [16, 4, 1]
        assert [row["maximalCells"] for row in stats.per_level] == [0, 0, 1]
        assert [row["goodWindows"] for row in stats.per_level] == [1, 1, 1]
        assert [row["associatedWindows"] for row in stats.per_level] == [0, 0, 1]
        assert stats.lower_bound_assoc == 32
        assert stats.lower_bound_series == Fraction(63, 2)
        assert stats.all_hold

    def test_exact_probability(self):
        p = params_512()
        pr = revealing_probability_exact(p, *block_queries(16))
        assert pr == pytest.approx(5 / 48, abs=1e-12)

    def test_mc_agrees(self):
        p = params_512()
        qx, qy = block_queries(16)
        est, err = revealing_probability_mc(p, qx, qy, trials=20000, seed=9)
        assert abs(est - 5 / 48) <= 4 * err + 1e-9

    def test_empty_query_set(self):
        p = params_512()
        assert revealing_probability_exact(p, [], []) == 0.0
        stats = classify_windows(p, [], [])
        assert stats.q == 0
        assert stats.lower_bound_assoc == 0
        assert stats.all_hold


class TestStrategies:
    def test_bridges_unlimited_reveals_surely(self):
        p = params_512()
        qx, qy = strategy_bridges(p)
        assert len(qx) == 272
        assert revealing_probability_exact(p, qx, qy) == pytest.approx(1.0)

    def test_bridges_budget_cutoffs(self):
        p = params_512()
        for q, want in ((64, 1 / 3), (136, 7 / 12), (272, 1.0)):
            qx, qy = strategy_bridges(p, q=q)
            assert len(qx) == q
            pr = revealing_probability_exact(p, qx, qy)
            assert pr == pytest.approx(want, abs=1e-12)

    def test_grid_misses_odd_bridge_rows(self):
        p = params_512()
        qx, qy = strategy_grid(p, 16384)
        assert revealing_probability_exact(p, qx, qy) == 0.0

    def test_uniform_exact_matches_mc(self):
        p = params_512()
        qx, qy = strategy_uniform(p, 16384, seed=3)
        assert len(qx) == 16384
        pr = revealing_probability_exact(p, qx, qy)
        est, err = revealing_probability_mc(p, qx, qy, trials=20000, seed=4)
        assert abs(est - pr) <= 4 * err + 1e-9

    def test_uniform_is_deterministic_per_seed(self):
        p = params_512()
        ax, ay = strategy_uniform(p, 100, seed=5)
        bx, by = strategy_uniform(p, 100, seed=5)
        assert np.array_equal(ax, bx) and np.array_equal(ay, by)


class TestMeasureCStar:
    def test_smoke(self):
        p = params_512()
        out = measure_cstar(p, seeds=(0,), steps=5)
        assert set(out) == {"cStar", "qAtCStar", "prAtCStar", "target"}
        assert 0 < out["cStar"] <= 1
        assert out["prAtCStar"] < out["target"]
        assert out["qAtCStar"] >= 1
