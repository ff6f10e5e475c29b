"""One-sided-error testers for connectedness of the black pixels.

Both variants share the same outer shape: a batch of uniform pixel samples,
then for every level i a number of uniformly sampled squares handed to a
per-square subroutine that hunts for a certificate that the square violates
border-connectedness.  A square-level certificate plus a black sample pixel
outside the square proves the whole image is disconnected, so rejections
carry a witness and never fire on connected images.

The nonadaptive variant queries whole squares exhaustively and registers its
complete query plan before reading a single answer.  The adaptive variant
queries a sparse diagonal lattice inside each square, classifies the diamond
regions between lattice lines as reachable or unreachable from the square
boundary, and only grows small component searches from sampled black pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .geometry import (
    DegenerateLattice,
    SquareRef,
    as_eps,
    diamond_index,
    lattice_count,
    lattice_pitch,
    level_count,
    level_side,
    sample_square,
)
from .image import Image, connected_components
from .oracle import NonadaptiveOracle, PixelOracle

EULER_GAMMA = 0.5772156649015329


class PremiseViolated(ValueError):
    """Normalized instance is too small for the requested proximity."""


class UnsoundCertificate(RuntimeError):
    """A rejection witness failed re-verification against the full image."""


class _BudgetExhausted(Exception):
    pass


def normalize(n: int, eps) -> tuple[int, Fraction]:
    """Pad the side to 2^j + 1 and shrink eps to keep the promise meaningful.

    The padded pixels are white and still count toward the area, so the
    effective proximity becomes the largest power of 1/2 at most
    eps * n^2 / n'^2.
    """
    eps = as_eps(eps)
    n = int(n)
    if n < 1:
        raise ValueError(f"image side must be positive, got {n}")
    j = max(n - 1, 1).bit_length() - 1
    if (1 << j) + 1 < n:
        j += 1
    n2 = (1 << j) + 1
    ratio = eps * Fraction(n * n, n2 * n2)
    p, q = ratio.numerator, ratio.denominator
    # Largest t with 2^-t <= ratio, i.e. smallest t with 2^t * p >= q.
    t = max(0, q.bit_length() - p.bit_length())
    while (p << t) < q:
        t += 1
    while t > 0 and (p << (t - 1)) >= q:
        t -= 1
    eps2 = Fraction(1, 1 << max(t, 1))
    return n2, eps2


def check_premise(n2: int, eps2) -> None:
    """Require n'^2 >= 64 / eps'^3 (exact comparison)."""
    eps2 = as_eps(eps2)
    if Fraction(n2 * n2) < 64 / eps2 ** 3:
        raise PremiseViolated(
            f"side {n2} too small for eps {eps2}: need side^2 >= 64/eps^3"
        )


def draw_stop(rng, cap: int) -> int:
    """Heavy-tailed stopping bound with Pr[x >= j] = 1/j, truncated at cap."""
    u = 1.0 - rng.random()
    return min(int(1.0 / u), cap)


@dataclass
class SubroutineResult:
    passed: bool
    kind: str | None = None
    pixels: list = field(default_factory=list)
    bfs_black_counts: list = field(default_factory=list)


@dataclass(frozen=True)
class Witness:
    """Evidence that a square violates border-connectedness.

    kind "isolated-component" carries the full pixel set of a black
    component of the square that never touches the square boundary; kind
    "unreachable" carries one black pixel whose region was classified as cut
    off from the boundary by the queried lattice.  outside_pixel is a black
    sample outside the square, which together with the certificate rules out
    global connectedness.
    """

    level: int
    k: int
    origin: tuple[int, int]
    kind: str
    pixels: tuple
    outside_pixel: tuple[int, int]


@dataclass
class Verdict:
    decision: str
    eps: Fraction
    variant: str
    seed: int
    n_original: int
    n_padded: int
    eps_effective: Fraction
    queries_used: int
    step1_queries: int
    level_queries: list
    subroutine_calls: int
    budget: int
    budget_exhausted: bool
    witness: Witness | None
    bfs_black_counts: list

    @property
    def accepted(self) -> bool:
        return self.decision == "accept"


def _square_positions(square: SquareRef):
    k = square.k
    u, v = square.origin
    ax = np.arange(1, k + 1, dtype=np.int32)
    gx, gy = np.meshgrid(ax + u, ax + v)
    return gx.ravel(), gy.ravel()


def evaluate_square_bits(bits: np.ndarray):
    """Local certificate pixels if the k x k contents are not
    border-connected, else None.  bits[r, c] is local pixel (c+1, r+1)."""
    labeling = connected_components(Image(bits))
    if labeling.count == 0 or labeling.touches_border.all():
        return None
    label = int(np.nonzero(~labeling.touches_border)[0][0]) + 1
    return [(x + 1, y + 1) for x, y in labeling.component_pixels(label)]


def exhaustive_square_test(oracle, square: SquareRef, guard=None) -> SubroutineResult:
    """Query every pixel of the square and decide border-connectedness."""
    if guard is not None:
        guard()
    xs, ys = _square_positions(square)
    vals = oracle.query_many(xs, ys)
    bits = vals.reshape(square.k, square.k)
    cert = evaluate_square_bits(bits)
    if cert is None:
        return SubroutineResult(passed=True)
    u, v = square.origin
    return SubroutineResult(passed=False, kind="isolated-component",
                            pixels=[(x + u, y + v) for x, y in cert])


def classify_diamonds(idx, lat_black: np.ndarray, early_check: bool = False):
    """Split diamonds into boundary-reachable (True) and unreachable (False).

    Every diamond containing a square-boundary pixel starts reachable, and a
    black lattice pixel welds all diamonds around it together, since a black
    region touching that pixel can slip across the lattice there.  The
    returned array marks the closure.  With early_check, also return one
    black lattice pixel all of whose adjacent diamonds ended unreachable, if
    any exists.
    """
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components as graph_components

    n_diamonds = idx.n_diamonds
    blk = np.nonzero(lat_black)[0]
    adj = None
    if len(blk):
        adj = idx.neighbor_diamonds_bulk(
            idx.lat_x[blk].astype(np.int64), idx.lat_y[blk].astype(np.int64)
        )
        valid = adj >= 0
        has_any = valid.any(axis=1)
        first_col = np.argmax(valid, axis=1)
        rows = np.arange(len(adj))
        first = np.where(has_any, adj[rows, first_col], 0)
        edges_a = []
        edges_b = []
        for col in range(4):
            mask = valid[:, col] & has_any & (first_col != col)
            if mask.any():
                edges_a.append(first[mask])
                edges_b.append(adj[mask, col])
    else:
        edges_a = edges_b = []
    if edges_a:
        a = np.concatenate(edges_a)
        b = np.concatenate(edges_b)
        graph = coo_matrix(
            (np.ones(len(a), dtype=np.int8), (a, b)),
            shape=(n_diamonds, n_diamonds),
        )
        _, comp = graph_components(graph, directed=False)
    else:
        comp = np.arange(n_diamonds)
    comp_reaches_ring = np.zeros(comp.max() + 1, dtype=bool)
    comp_reaches_ring[comp[idx.ring]] = True
    in_b = comp_reaches_ring[comp]

    early_witness = None
    if early_check and adj is not None:
        reach = np.where(adj >= 0, in_b[np.clip(adj, 0, None)], False)
        stuck = (adj >= 0).any(axis=1) & ~reach.any(axis=1)
        hits = np.nonzero(stuck)[0]
        if len(hits):
            i = int(hits[0])
            early_witness = (int(idx.lat_x[blk[i]]), int(idx.lat_y[blk[i]]))
    return in_b, early_witness


def diagonal_square_test(oracle, square: SquareRef, rng, guard=None,
                         early_reject: bool = False) -> SubroutineResult:
    """Sparse subroutine: lattice snapshot, diamond classification, then
    stop-bounded component searches from sampled black pixels."""
    k = square.k
    if lattice_pitch(k) < 3:
        return exhaustive_square_test(oracle, square, guard)
    idx = diamond_index(k)
    u, v = square.origin
    if guard is not None:
        guard()
    lat_black = oracle.query_many(idx.lat_x.astype(np.int64) + u,
                                  idx.lat_y.astype(np.int64) + v)
    in_b, early_witness = classify_diamonds(idx, lat_black, early_check=early_reject)
    if early_witness is not None:
        lx, ly = early_witness
        return SubroutineResult(
            passed=False, kind="unreachable", pixels=[(lx + u, ly + v)]
        )

    samples = (k * idx.m + 1) // 2
    bfs_black_counts: list = []
    for _ in range(samples):
        if guard is not None:
            guard()
        lx = int(rng.integers(1, k + 1))
        ly = int(rng.integers(1, k + 1))
        if not oracle.query(lx + u, ly + v):
            continue
        d = idx.diamond_id(lx, ly)
        if d < 0:
            ds = idx.adjacent_diamonds(lx, ly)
            if ds and not any(in_b[dd] for dd in ds):
                return SubroutineResult(
                    passed=False, kind="unreachable", pixels=[(lx + u, ly + v)],
                    bfs_black_counts=bfs_black_counts,
                )
            continue
        if not in_b[d]:
            return SubroutineResult(
                passed=False, kind="unreachable", pixels=[(lx + u, ly + v)],
                bfs_black_counts=bfs_black_counts,
            )
        stop = draw_stop(rng, k * k)
        component = _bounded_component(oracle, square, (lx, ly), stop, guard)
        if component is not None:
            bfs_black_counts.append(len(component))
            return SubroutineResult(
                passed=False, kind="isolated-component",
                pixels=[(x + u, y + v) for x, y in component],
                bfs_black_counts=bfs_black_counts,
            )
        bfs_black_counts.append(0)
    return SubroutineResult(passed=True, bfs_black_counts=bfs_black_counts)


def _bounded_component(oracle, square: SquareRef, start, stop: int, guard):
    """Grow the black component of start inside the square, halting without
    evidence once stop+1 black pixels are seen or the boundary is touched.
    Returns the complete component (local coordinates) only when it is fully
    enclosed and holds at most stop pixels."""
    k = square.k
    u, v = square.origin
    lx, ly = start
    if lx == 1 or lx == k or ly == 1 or ly == k:
        return None
    seen = {(lx, ly)}
    blacks = [(lx, ly)]
    frontier = [(lx, ly)]
    while frontier:
        cx, cy = frontier.pop()
        for dx, dy in ((0, -1), (0, 1), (-1, 0), (1, 0)):
            nx, ny = cx + dx, cy + dy
            if not (1 <= nx <= k and 1 <= ny <= k) or (nx, ny) in seen:
                continue
            seen.add((nx, ny))
            if guard is not None:
                guard()
            if not oracle.query(nx + u, ny + v):
                continue
            if nx == 1 or nx == k or ny == 1 or ny == k:
                return None
            blacks.append((nx, ny))
            if len(blacks) > stop:
                return None
            frontier.append((nx, ny))
    return blacks


def _harmonic(t: int) -> float:
    if t < 64:
        return sum(1.0 / j for j in range(1, t + 1))
    return math.log(t) + EULER_GAMMA + 1.0 / (2 * t)


def analytic_query_budget(eps, variant: str, factor: float = 8.0) -> int:
    """factor times an analytic bound on the expected query count."""
    eps = as_eps(eps)
    total = float(8 / eps)
    for i in range(level_count(eps)):
        k = level_side(eps, i)
        m = lattice_pitch(k)
        if m >= 3 and variant == "adaptive":
            per_sample = 1.0 + 4.0 * (_harmonic(k * k) + 1.0)
            cost = lattice_count(k) + ((k * m + 1) // 2) * per_sample
        else:
            cost = float(k * k)
        total += 2.0 ** (i + 1) * cost
    return math.ceil(factor * total)


def _find_outside_black(step1_xs, step1_ys, step1_black, square: SquareRef):
    u, v = square.origin
    k = square.k
    inside = (
        (step1_xs >= u + 1) & (step1_xs <= u + k)
        & (step1_ys >= v + 1) & (step1_ys <= v + k)
    )
    hits = np.nonzero(step1_black & ~inside)[0]
    if len(hits) == 0:
        return None
    j = int(hits[0])
    return int(step1_xs[j]), int(step1_ys[j])


def test_connectedness(source, eps, variant: str = "adaptive", seed=0,
                       record_log: bool = False, query_budget: int | None = None,
                       budget_factor: float = 8.0,
                       early_reject: bool = False) -> Verdict:
    """Run the tester on a pixel source; never rejects a connected image.

    The image is padded to a normalized side first; the padding is white and
    counts toward the area, which the effective eps accounts for.  The
    query budget defaults to budget_factor times an analytic bound on the
    expected count; a run that hits it accepts with budget_exhausted set.
    """
    if variant not in ("adaptive", "nonadaptive"):
        raise ValueError(f"unknown variant {variant!r}")
    if isinstance(source, np.ndarray):
        source = Image(source)
    eps = as_eps(eps)
    n = source.side
    n2, eps2 = normalize(n, eps)
    check_premise(n2, eps2)
    levels = level_count(eps2)
    step1_n = int(8 / eps2)
    budget = query_budget if query_budget is not None else analytic_query_budget(
        eps2, variant, budget_factor
    )

    if isinstance(seed, np.random.SeedSequence):
        root = seed
    else:
        root = np.random.SeedSequence(int(seed))
    total_calls = sum(2 ** (i + 1) for i in range(levels))
    children = root.spawn(2 + total_calls)
    rng_step1 = np.random.Generator(np.random.PCG64(children[0]))
    rng_squares = np.random.Generator(np.random.PCG64(children[1]))

    step1_xs = rng_step1.integers(0, n2, size=step1_n).astype(np.int64)
    step1_ys = rng_step1.integers(0, n2, size=step1_n).astype(np.int64)
    plan = [
        sample_square(n2, eps2, i, rng_squares)
        for i in range(levels)
        for _ in range(2 ** (i + 1))
    ]

    if variant == "nonadaptive":
        return _run_nonadaptive(
            source, eps, eps2, n, n2, seed, record_log, budget,
            step1_xs, step1_ys, plan, levels,
        )
    return _run_adaptive(
        source, eps, eps2, n, n2, seed, record_log, budget,
        step1_xs, step1_ys, plan, levels, children[2:], early_reject,
    )


def _verdict(decision, *, eps, variant, seed, n, n2, eps2, oracle, step1_n,
             level_queries, calls, budget, exhausted, witness, bfs_counts):
    return Verdict(
        decision=decision, eps=eps, variant=variant, seed=_seed_value(seed),
        n_original=n, n_padded=n2, eps_effective=eps2,
        queries_used=oracle.count, step1_queries=step1_n,
        level_queries=level_queries, subroutine_calls=calls,
        budget=budget, budget_exhausted=exhausted,
        witness=witness, bfs_black_counts=bfs_counts,
    )


def _seed_value(seed):
    if isinstance(seed, np.random.SeedSequence):
        ent = seed.entropy
        return int(ent) if np.isscalar(ent) else int(np.asarray(ent).ravel()[0])
    return int(seed)


def _run_adaptive(source, eps, eps2, n, n2, seed, record_log, budget,
                  step1_xs, step1_ys, plan, levels, call_seeds, early_reject):
    oracle = PixelOracle(source, side=n2, record_log=record_log)

    def guard():
        if oracle.count >= budget:
            raise _BudgetExhausted

    level_queries = [0] * levels
    bfs_counts: list = []
    calls = 0
    witness = None
    exhausted = False
    try:
        guard()
        step1_black = oracle.query_many(step1_xs, step1_ys)
        for call_idx, square in enumerate(plan):
            before = oracle.count
            crng = np.random.Generator(np.random.PCG64(call_seeds[call_idx]))
            try:
                result = diagonal_square_test(
                    oracle, square, crng, guard, early_reject=early_reject
                )
            finally:
                level_queries[square.level] += oracle.count - before
            calls += 1
            bfs_counts.extend(result.bfs_black_counts)
            if not result.passed:
                outside = _find_outside_black(
                    step1_xs, step1_ys, step1_black, square
                )
                if outside is not None:
                    witness = Witness(
                        level=square.level, k=square.k, origin=square.origin,
                        kind=result.kind, pixels=tuple(result.pixels),
                        outside_pixel=outside,
                    )
                    break
    except _BudgetExhausted:
        exhausted = True
    return _verdict(
        "reject" if witness else "accept",
        eps=eps, variant="adaptive", seed=seed, n=n, n2=n2, eps2=eps2,
        oracle=oracle, step1_n=len(step1_xs), level_queries=level_queries,
        calls=calls, budget=budget, exhausted=exhausted, witness=witness,
        bfs_counts=bfs_counts,
    )


def _run_nonadaptive(source, eps, eps2, n, n2, seed, record_log, budget,
                     step1_xs, step1_ys, plan, levels):
    oracle = NonadaptiveOracle(source, side=n2, record_log=record_log)
    level_queries = [0] * levels
    planned = len(step1_xs) + sum(sq.k * sq.k for sq in plan)
    if planned > budget:
        return _verdict(
            "accept", eps=eps, variant="nonadaptive", seed=seed, n=n, n2=n2,
            eps2=eps2, oracle=oracle, step1_n=len(step1_xs),
            level_queries=level_queries, calls=0, budget=budget,
            exhausted=True, witness=None, bfs_counts=[],
        )
    tok_step1 = oracle.collect(step1_xs, step1_ys)
    tokens = []
    for square in plan:
        xs, ys = _square_positions(square)
        tokens.append(oracle.collect(xs, ys))
        level_queries[square.level] += len(xs)
    oracle.seal()

    step1_black = oracle.answers(tok_step1, step1_xs, step1_ys)
    witness = None
    calls = 0
    for square, token in zip(plan, tokens):
        xs, ys = _square_positions(square)
        bits = oracle.answers(token, xs, ys).reshape(square.k, square.k)
        calls += 1
        cert = evaluate_square_bits(bits)
        if cert is None:
            continue
        outside = _find_outside_black(step1_xs, step1_ys, step1_black, square)
        if outside is not None:
            u, v = square.origin
            witness = Witness(
                level=square.level, k=square.k, origin=square.origin,
                kind="isolated-component",
                pixels=tuple((x + u, y + v) for x, y in cert),
                outside_pixel=outside,
            )
            break
    return _verdict(
        "reject" if witness else "accept",
        eps=eps, variant="nonadaptive", seed=seed, n=n, n2=n2, eps2=eps2,
        oracle=oracle, step1_n=len(step1_xs), level_queries=level_queries,
        calls=calls, budget=budget, exhausted=False, witness=witness,
        bfs_counts=[],
    )


def query_report(verdict: Verdict) -> dict:
    """Per-level query breakdown of a finished run."""
    bfs = verdict.bfs_black_counts
    return {
        "decision": verdict.decision,
        "variant": verdict.variant,
        "eps": str(verdict.eps),
        "epsEffective": str(verdict.eps_effective),
        "sideOriginal": verdict.n_original,
        "sidePadded": verdict.n_padded,
        "totalQueries": verdict.queries_used,
        "step1Queries": verdict.step1_queries,
        "perLevelQueries": list(verdict.level_queries),
        "subroutineCalls": verdict.subroutine_calls,
        "budget": verdict.budget,
        "budgetExhausted": verdict.budget_exhausted,
        "componentSearches": len(bfs),
        "maxComponentSearchBlacks": max(bfs) if bfs else 0,
    }


def _padded_get(source, n2: int):
    inner = source.side

    def get(x: int, y: int) -> bool:
        if x >= inner or y >= inner:
            return False
        return bool(source.probe_many(
            np.array([x], dtype=np.int64), np.array([y], dtype=np.int64)
        )[0])

    return get


def verify_verdict(source, verdict: Verdict) -> dict:
    """Re-check a rejection against the full image; raises UnsoundCertificate.

    Uses complete knowledge of the image: the witness square must really
    contain a black component that avoids the square boundary (for
    isolated-component witnesses, exactly the certified pixel set), and the
    outside pixel must really be black and outside the square.
    """
    if verdict.decision == "accept":
        return {"ok": True, "checked": False}
    if isinstance(source, np.ndarray):
        source = Image(source)
    w = verdict.witness
    if w is None:
        raise UnsoundCertificate("rejection without witness")
    k = w.k
    u, v = w.origin
    n2 = verdict.n_padded
    if not (0 <= u and u + k < n2 and 0 <= v and v + k < n2):
        raise UnsoundCertificate("witness square out of bounds")

    ax = np.arange(1, k + 1, dtype=np.int64)
    gx, gy = np.meshgrid(ax + u, ax + v)
    inner = source.side
    flat_x = gx.ravel()
    flat_y = gy.ravel()
    bits = np.zeros(k * k, dtype=bool)
    mask = (flat_x < inner) & (flat_y < inner)
    if mask.any():
        bits[mask] = source.probe_many(flat_x[mask], flat_y[mask])
    labeling = connected_components(Image(bits.reshape(k, k)))

    if not w.pixels:
        raise UnsoundCertificate("empty certificate")
    px, py = w.pixels[0]
    lx, ly = px - u, py - v
    if not (1 <= lx <= k and 1 <= ly <= k):
        raise UnsoundCertificate("certificate pixel outside witness square")
    label = int(labeling.labels[ly - 1, lx - 1])
    if label == 0:
        raise UnsoundCertificate("certificate pixel is white")
    if labeling.touches_border[label - 1]:
        raise UnsoundCertificate("certified component touches the square boundary")
    if w.kind == "isolated-component":
        actual = {(x + 1 + u, y + 1 + v)
                  for x, y in labeling.component_pixels(label)}
        if actual != set(w.pixels):
            raise UnsoundCertificate("certificate does not match the component")
    elif w.kind != "unreachable":
        raise UnsoundCertificate(f"unknown witness kind {w.kind!r}")

    ox, oy = w.outside_pixel
    if not (0 <= ox < n2 and 0 <= oy < n2):
        raise UnsoundCertificate("outside pixel out of bounds")
    if u + 1 <= ox <= u + k and v + 1 <= oy <= v + k:
        raise UnsoundCertificate("outside pixel lies inside the witness square")
    if not _padded_get(source, n2)(ox, oy):
        raise UnsoundCertificate("outside pixel is white")
    return {"ok": True, "checked": True, "kind": w.kind, "level": w.level}
