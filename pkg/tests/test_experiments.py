"""Trial harness: Wilson intervals, seeding, aggregation, parallel parity."""

import dataclasses
from fractions import Fraction

import numpy as np
import pytest
from scipy.stats import binomtest

from conntest.experiments import (run_trials, run_trials_from_file, sweep,
                                  trial_seed, wilson_interval)
from conntest.instances import gen_connected, gen_dot_far
from conntest.oracle import AllWhiteSource
from conntest.pbm import save


class TestWilson:
    @pytest.mark.parametrize("successes,trials", [
        (8, 10), (0, 10), (10, 10), (1, 2000), (1234, 2000),
    ])
    def test_matches_scipy(self, successes, trials):
        low, high = wilson_interval(successes, trials)
        ref = binomtest(successes, trials).proportion_ci(
            confidence_level=0.95, method="wilson")
        assert low == pytest.approx(ref.low, abs=1e-12)
        assert high == pytest.approx(ref.high, abs=1e-12)

    def test_contains_point_estimate(self):
        for s, t in ((3, 7), (50, 51), (1, 99)):
            low, high = wilson_interval(s, t)
            assert low < s / t < high

    def test_input_validation(self):
        with pytest.raises(ValueError):
            wilson_interval(1, 0)
        with pytest.raises(ValueError):
            wilson_interval(5, 4)


class TestTrialSeed:
    def test_distinct_streams(self):
        draws = {
            np.random.Generator(np.random.PCG64(trial_seed(7, t))).integers(2 ** 62)
            for t in range(50)
        }
        assert len(draws) == 50

    def test_reproducible(self):
        a = trial_seed(7, 3).generate_state(4)
        b = trial_seed(7, 3).generate_state(4)
        assert np.array_equal(a, b)


class TestRunTrials:
    def test_connected_source_never_rejects(self):
        summary = run_trials(AllWhiteSource(513), Fraction(1, 16),
                             "adaptive", trials=5, root_seed=1)
        assert summary.trials == 5
        assert summary.rejections == 0
        assert summary.rejection_rate == 0.0
        assert summary.wilson_low == 0.0
        assert summary.verified_rejections == 0
        assert summary.min_queries > 0
        assert summary.max_queries >= summary.min_queries
        d = summary.to_dict()
        assert d["eps"] == "1/16" and d["variant"] == "adaptive"

    def test_far_source_rejects_and_verifies(self):
        inst = gen_dot_far(513, Fraction(1, 16), seed=2, spacing=2)
        summary = run_trials(inst.image, Fraction(1, 16), "adaptive",
                             trials=20, root_seed=3)
        assert summary.rejections >= 14
        assert summary.verified_rejections == summary.rejections
        assert summary.wilson_low > 0.4

    def test_source_pool_cycles(self):
        pool = [gen_connected(513, family="solid"),
                gen_connected(513, family="serpentine", seed=1)]
        summary = run_trials(pool, Fraction(1, 16), "adaptive", trials=4,
                             root_seed=0)
        assert summary.rejections == 0

    def test_budget_exhaustion_counted(self):
        inst = gen_dot_far(513, Fraction(1, 16), seed=4, spacing=2)
        summary = run_trials(inst.image, Fraction(1, 16), "adaptive",
                             trials=3, root_seed=0, query_budget=50)
        assert summary.budget_exhausted_runs == 3
        assert summary.rejections == 0
        assert summary.max_queries <= 128

    def test_callable_source(self):
        calls = []

        def make(t):
            calls.append(t)
            return AllWhiteSource(513)

        run_trials(make, Fraction(1, 16), "adaptive", trials=3, root_seed=0)
        assert calls == [0, 1, 2]


class TestRunTrialsFromFile:
    def test_job_count_does_not_change_aggregates(self, tmp_path):
        inst = gen_dot_far(513, Fraction(1, 16), seed=5, spacing=2)
        path = tmp_path / "far.pbm"
        save(path, inst.image)
        kw = dict(eps=Fraction(1, 16), variant="adaptive", trials=12,
                  root_seed=11)
        one = run_trials_from_file(path, **kw)
        three = run_trials_from_file(path, jobs=3, **kw)
        a = dataclasses.asdict(one)
        b = dataclasses.asdict(three)
        a.pop("runtime_s")
        b.pop("runtime_s")
        assert a == b
        assert one.rejections >= 8

    def test_matches_in_memory_run(self, tmp_path):
        img = gen_connected(513, family="blob", seed=6)
        path = tmp_path / "blob.pbm"
        save(path, img)
        from_file = run_trials_from_file(path, Fraction(1, 16), "adaptive",
                                         trials=4, root_seed=2)
        in_memory = run_trials(img, Fraction(1, 16), "adaptive", trials=4,
                               root_seed=2)
        assert from_file.mean_queries == in_memory.mean_queries
        assert from_file.rejections == in_memory.rejections


class TestSweep:
    def test_row_shape(self):
        rows = sweep(lambda eps, t: AllWhiteSource(513), [Fraction(1, 16)],
                     "adaptive", trials=3)
        assert len(rows) == 1
        row = rows[0]
        assert set(row) == {"eps", "meanQueries", "maxQueries",
                            "rejectionRate", "runtime"}
        assert row["eps"] == "1/16"
        assert row["rejectionRate"] == 0.0
        assert row["meanQueries"] > 0
