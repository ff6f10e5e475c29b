"""Repeated-trial harnesses: rejection rates, query sweeps, audits."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict

import numpy as np

from .geometry import as_eps
from .image import Image
from .testers import test_connectedness, verify_verdict

_Z95 = 1.959963984540054


def wilson_interval(successes: int, trials: int,
                    z: float = _Z95) -> tuple[float, float]:
    """Score confidence interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    p = successes / trials
    z2 = z * z
    denom = 1 + z2 / trials
    center = (p + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials))
    half /= denom
    return max(0.0, center - half), min(1.0, center + half)


def trial_seed(root_seed: int, trial: int) -> np.random.SeedSequence:
    """Independent per-trial randomness under one reproducible root.

    Keyed by trial index so aggregates do not depend on scheduling order.
    """
    return np.random.SeedSequence(entropy=int(root_seed), spawn_key=(trial,))


@dataclass
class TrialSummary:
    eps: str
    variant: str
    trials: int
    rejections: int
    rejection_rate: float
    wilson_low: float
    wilson_high: float
    mean_queries: float
    max_queries: int
    min_queries: int
    mean_level_queries: list
    budget_exhausted_runs: int
    verified_rejections: int
    runtime_s: float
    root_seed: int

    def to_dict(self) -> dict:
        return asdict(self)


def _as_source_fn(sources):
    if callable(sources) and not isinstance(sources, (Image, np.ndarray)):
        return sources
    if isinstance(sources, (list, tuple)):
        pool = list(sources)
        return lambda t: pool[t % len(pool)]
    return lambda t: sources


def _run_range(sources, eps, variant, start, stop, root_seed, verify,
               query_budget, budget_factor, early_reject, progress=None):
    src_fn = _as_source_fn(sources)
    part = {
        "rejections": 0, "verified": 0, "exhausted": 0,
        "counts": np.zeros(stop - start, dtype=np.int64),
        "level_totals": None,
    }
    for t in range(start, stop):
        source = src_fn(t)
        verdict = test_connectedness(
            source, eps, variant=variant, seed=trial_seed(root_seed, t),
            query_budget=query_budget, budget_factor=budget_factor,
            early_reject=early_reject,
        )
        part["counts"][t - start] = verdict.queries_used
        part["exhausted"] += verdict.budget_exhausted
        levels = np.asarray(verdict.level_queries, dtype=np.int64)
        if part["level_totals"] is None:
            part["level_totals"] = levels.copy()
        else:
            part["level_totals"] += levels
        if not verdict.accepted:
            part["rejections"] += 1
            if verify:
                verify_verdict(source, verdict)
                part["verified"] += 1
        if progress is not None:
            progress(t + 1)
    return part


def _summarize(eps, variant, trials, parts, counts, runtime,
               root_seed) -> TrialSummary:
    rejections = sum(p["rejections"] for p in parts)
    level_totals = sum(
        (p["level_totals"] for p in parts if p["level_totals"] is not None),
        start=np.zeros(1, dtype=np.int64),
    )
    low, high = wilson_interval(rejections, trials)
    return TrialSummary(
        eps=str(eps), variant=variant, trials=trials, rejections=rejections,
        rejection_rate=rejections / trials, wilson_low=low, wilson_high=high,
        mean_queries=float(counts.mean()), max_queries=int(counts.max()),
        min_queries=int(counts.min()),
        mean_level_queries=[float(v) / trials for v in level_totals],
        budget_exhausted_runs=sum(p["exhausted"] for p in parts),
        verified_rejections=sum(p["verified"] for p in parts),
        runtime_s=runtime, root_seed=int(root_seed),
    )


def run_trials(sources, eps, variant: str, trials: int, root_seed: int = 0,
               verify: bool = True, query_budget: int | None = None,
               budget_factor: float = 8.0, early_reject: bool = False,
               progress=None) -> TrialSummary:
    """Run the tester repeatedly and aggregate decisions and query counts.

    sources is a single pixel source, a pool to cycle through, or a callable
    mapping the trial index to a source.  Every rejection is re-checked
    against the full image when verify is set; an unsound certificate
    raises instead of counting.
    """
    eps = as_eps(eps)
    t0 = time.perf_counter()
    cb = None if progress is None else (lambda done: progress(done, trials))
    part = _run_range(sources, eps, variant, 0, trials, root_seed, verify,
                      query_budget, budget_factor, early_reject, cb)
    runtime = time.perf_counter() - t0
    return _summarize(eps, variant, trials, [part], part["counts"], runtime,
                      root_seed)


def _file_range_job(args):
    (path, eps, variant, start, stop, root_seed, verify,
     query_budget, budget_factor) = args
    from .pbm import load

    image = load(path)
    return start, _run_range(image, eps, variant, start, stop, root_seed,
                             verify, query_budget, budget_factor, False)


def run_trials_from_file(path, eps, variant: str, trials: int,
                         root_seed: int = 0, verify: bool = True,
                         query_budget: int | None = None,
                         budget_factor: float = 8.0,
                         jobs: int = 1) -> TrialSummary:
    """run_trials against an image file, optionally across worker processes.

    Trials are chunked by index and each worker reloads the image, so the
    aggregate is identical for any job count.
    """
    from .pbm import load

    eps = as_eps(eps)
    jobs = max(1, min(int(jobs), trials))
    t0 = time.perf_counter()
    if jobs == 1:
        summary = run_trials(load(path), eps, variant, trials,
                             root_seed=root_seed, verify=verify,
                             query_budget=query_budget,
                             budget_factor=budget_factor)
        return summary
    bounds = np.linspace(0, trials, jobs + 1, dtype=int)
    job_args = [
        (str(path), eps, variant, int(bounds[j]), int(bounds[j + 1]),
         root_seed, verify, query_budget, budget_factor)
        for j in range(jobs)
        if bounds[j] < bounds[j + 1]
    ]
    counts = np.zeros(trials, dtype=np.int64)
    parts = []
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for start, part in pool.map(_file_range_job, job_args):
            counts[start:start + len(part["counts"])] = part["counts"]
            parts.append(part)
    runtime = time.perf_counter() - t0
    return _summarize(eps, variant, trials, parts, counts, runtime, root_seed)


def sweep(make_source, eps_values, variant: str, trials: int,
          root_seed: int = 0, verify: bool = True, progress=None) -> list[dict]:
    """One summary row per eps; make_source(eps, trial) supplies the image."""
    rows = []
    for eps in eps_values:
        eps = as_eps(eps)
        summary = run_trials(
            lambda t, e=eps: make_source(e, t), eps, variant, trials,
            root_seed=root_seed, verify=verify, progress=progress,
        )
        rows.append({
            "eps": str(eps),
            "meanQueries": summary.mean_queries,
            "maxQueries": summary.max_queries,
            "rejectionRate": summary.rejection_rate,
            "runtime": summary.runtime_s,
        })
    return rows
