"""Hard far-from-connected instances and the query-counting game they imply.

An instance picks a level, places an interesting window of that level
uniformly on the n x n area of an (n+1) x (n+1) canvas, fills it with a
checkerboard of a x a cells, threads almost-black bridge rows through the
white cells (each broken by one uniformly random disconnecting pixel), and
draws a black line column immediately right of the window.  A nonadaptive
query set can only certify disconnectedness if it contains every
disconnecting pixel of some bridge square in the window, so the probability
of that event bounds any tester's success; the window/cell accounting
(covered and maximal cells, good windows, the association procedure) turns
a small query budget into a small event probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .image import Image, connected_components


class InvalidParams(ValueError):
    """Construction constraints violated; the message lists all of them."""


@dataclass(frozen=True)
class HardLevel:
    index: int
    a: int
    window_side: int
    windows_per_row: int
    cells_per_window_row: int
    bridges_per_square: int

    @property
    def window_count(self) -> int:
        return self.windows_per_row ** 2

    @property
    def black_cells_per_window(self) -> int:
        return self.cells_per_window_row ** 2 // 2

    @property
    def bridge_squares_per_window(self) -> int:
        return self.cells_per_window_row ** 2 // 2 - self.cells_per_window_row // 2


@dataclass(frozen=True)
class HardParams:
    n: int
    eps: Fraction
    lo: int
    hi: int
    levels: tuple

    @property
    def canvas_side(self) -> int:
        return self.n + 1

    def level(self, index: int) -> HardLevel:
        return self.levels[index - self.lo]


def make_hard_params(n: int, eps) -> HardParams:
    """Validate and precompute the construction constants.

    Requires n a power of 2 with 16 n > (1/eps)^(5/8), and 1/eps = 2^(8 m)
    for an integer m >= 2 (so levels run from m to 2 m and the top window
    still fits the canvas).
    """
    problems = []
    n = int(n)
    eps = Fraction(eps)
    if n < 1 or n & (n - 1):
        problems.append(f"n = {n} is not a power of 2")
    if not 0 < eps < 1:
        problems.append(f"eps = {eps} is not in (0, 1)")
        raise InvalidParams("; ".join(problems))
    inv = 1 / eps
    logeps = inv.numerator.bit_length() - 1
    if inv.denominator != 1 or inv.numerator != 1 << logeps:
        problems.append(f"1/eps = {inv} is not a power of 2")
        raise InvalidParams("; ".join(problems))
    if logeps % 8:
        problems.append(f"log2(1/eps) = {logeps} is not a multiple of 8")
    m = logeps // 8
    if logeps % 8 == 0 and m < 2:
        problems.append(
            f"1/eps = 2^{logeps} gives m = {m} < 2, so the top-level window "
            f"would not fit inside the canvas"
        )
    if not problems and 16 * n <= 2 ** (5 * m):
        problems.append(
            f"n = {n} must exceed (1/eps)^(5/8) / 16 = {2 ** (5 * m) // 16}"
        )
    if problems:
        raise InvalidParams("; ".join(problems))

    lo, hi = m, 2 * m
    levels = []
    for i in range(lo, hi + 1):
        a = 1 << i
        window_side = (n << (i + 4)) >> (4 * m)
        levels.append(HardLevel(
            index=i, a=a, window_side=window_side,
            windows_per_row=n // window_side,
            cells_per_window_row=window_side // a,
            bridges_per_square=a // 2 - 1,
        ))
    return HardParams(n=n, eps=eps, lo=lo, hi=hi, levels=tuple(levels))


def bridge_cells(level: HardLevel):
    """Row-major (R, C) of the white cells off the first column."""
    cells = level.cells_per_window_row
    rr, cc = np.meshgrid(np.arange(cells), np.arange(cells), indexing="ij")
    mask = ((rr + cc) % 2 == 1) & (cc >= 1)
    return rr[mask], cc[mask]


@dataclass(frozen=True)
class HardMeta:
    """Everything random about one drawn instance: the level, the window
    index (row-major), and the disconnecting-pixel offsets, one per bridge,
    row-major over bridge squares."""

    params: HardParams
    level: int
    window_index: int
    disc_offsets: np.ndarray

    @property
    def window_origin(self) -> tuple[int, int]:
        lv = self.params.level(self.level)
        wr, wc = divmod(self.window_index, lv.windows_per_row)
        return wc * lv.window_side, wr * lv.window_side


def sample_hard_meta(params: HardParams, rng) -> HardMeta:
    level = int(rng.integers(params.lo, params.hi + 1))
    lv = params.level(level)
    window_index = int(rng.integers(0, lv.window_count))
    rs, _ = bridge_cells(lv)
    disc = rng.integers(0, lv.a, size=(len(rs), lv.bridges_per_square))
    return HardMeta(params=params, level=level, window_index=window_index,
                    disc_offsets=disc)


def render_hard(meta: HardMeta) -> Image:
    params = meta.params
    lv = params.level(meta.level)
    n = params.n
    a = lv.a
    side = lv.window_side
    wx, wy = meta.window_origin
    bits = np.zeros((n + 1, n + 1), dtype=bool)

    local = np.arange(side) // a
    checker = (local[:, None] + local[None, :]) % 2 == 0
    bits[wy:wy + side, wx:wx + side] = checker

    rs, cs = bridge_cells(lv)
    for b in range(len(rs)):
        x0 = wx + int(cs[b]) * a
        y0 = wy + int(rs[b]) * a
        for k in range(lv.bridges_per_square):
            row = y0 + 2 * k + 1
            bits[row, x0:x0 + a] = True
            bits[row, x0 + int(meta.disc_offsets[b, k])] = False

    bits[wy:wy + side, wx + side] = True
    return Image(bits)


def sample_hard(params: HardParams, seed) -> tuple[Image, HardMeta]:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    meta = sample_hard_meta(params, rng)
    return render_hard(meta), meta


def farness_audit(image, eps, area_side: int | None = None) -> dict:
    """Component-count lower bound on the distance to connectedness.

    One pixel change merges at most 3 components (white to black) or
    removes at most 1 (black to white), so (components - 1) / 3 changes are
    necessary.  area_side sets the n in the eps n^2 farness scale; defaults
    to the image side.
    """
    if isinstance(image, np.ndarray):
        image = Image(image)
    n = image.side if area_side is None else int(area_side)
    count = connected_components(image).count
    bound = Fraction(max(count - 1, 0), 3)
    eps = Fraction(eps)
    return {
        "componentCount": count,
        "distanceLowerBound": bound,
        "epsArea": eps * n * n,
        "isEpsFar": bound >= eps * n * n,
    }


# --- Query-counting game --------------------------------------------------

def canonical_queries(qx, qy, canvas_side: int):
    """Deduplicate a query multiset into the set the game reasons about."""
    qx = np.asarray(qx, dtype=np.int64)
    qy = np.asarray(qy, dtype=np.int64)
    if len(qx) != len(qy):
        raise ValueError("coordinate arrays must have equal length")
    if len(qx) and (qx.min() < 0 or qy.min() < 0
                    or qx.max() >= canvas_side or qy.max() >= canvas_side):
        raise ValueError(f"queries outside the {canvas_side}^2 canvas")
    codes = np.unique(qx * canvas_side + qy)
    return codes // canvas_side, codes % canvas_side


@dataclass
class WindowStats:
    q: int
    per_level: list
    lower_bound_assoc: Fraction
    lower_bound_series: Fraction
    holds_assoc: bool
    holds_top: bool
    holds_recursion: bool
    holds_series: bool

    @property
    def all_hold(self) -> bool:
        return (self.holds_assoc and self.holds_top
                and self.holds_recursion and self.holds_series)


def _covered_grids(params: HardParams, qx, qy):
    """Per level: bool array over the level's cell grid marking covered
    cells (>= a^2/8 queries)."""
    n = params.n
    inside = (qx < n) & (qy < n)
    qx = qx[inside]
    qy = qy[inside]
    covered = {}
    for lv in params.levels:
        a = lv.a
        per_row = n // a
        idx = (qy // a) * per_row + (qx // a)
        counts = np.bincount(idx, minlength=per_row * per_row)
        covered[lv.index] = (8 * counts >= a * a).reshape(per_row, per_row)
    return covered


def _maximal_grids(params: HardParams, covered):
    """Covered cells not contained in a covered cell of a higher level."""
    maximal = {}
    for lv in params.levels:
        i = lv.index
        blocked = np.zeros_like(covered[i])
        for j in range(i + 1, params.hi + 1):
            scale = 1 << (j - i)
            blocked |= np.kron(covered[j], np.ones((scale, scale), dtype=bool))
        maximal[i] = covered[i] & ~blocked
    return maximal


def classify_windows(params: HardParams, qx, qy) -> WindowStats:
    """Covered/maximal cells, good windows, and the association procedure.

    Windows are visited level by level from the highest, row-major inside a
    level; a good window is associated only when every maximal cell of
    level >= its own inside it is still unassociated, and then with the
    first such cell in (level, row, column) order.
    """
    qx, qy = canonical_queries(qx, qy, params.canvas_side)
    q = len(qx)
    covered = _covered_grids(params, qx, qy)
    maximal = _maximal_grids(params, covered)
    associated = {lv.index: np.zeros_like(maximal[lv.index])
                  for lv in params.levels}

    t: dict[int, int] = {}
    g: dict[int, int] = {}
    good_grids: dict[int, np.ndarray] = {}
    for lv in params.levels:
        i = lv.index
        wpr = lv.windows_per_row
        good = np.zeros((wpr, wpr), dtype=bool)
        for j in range(i, params.hi + 1):
            per_w = lv.window_side // (1 << j)
            grid = covered[j]
            folded = grid.reshape(wpr, per_w, wpr, per_w).any(axis=(1, 3))
            good |= folded
        good_grids[i] = good
        t[i] = int(good.sum())

    for i in range(params.hi, params.lo - 1, -1):
        lv = params.level(i)
        wpr = lv.windows_per_row
        count = 0
        for wr in range(wpr):
            for wc in range(wpr):
                if not good_grids[i][wr, wc]:
                    continue
                cells = []
                blocked = False
                for j in range(i, params.hi + 1):
                    per_w = lv.window_side // (1 << j)
                    sub = maximal[j][wr * per_w:(wr + 1) * per_w,
                                     wc * per_w:(wc + 1) * per_w]
                    for r, c in zip(*np.nonzero(sub)):
                        rr, cc = wr * per_w + int(r), wc * per_w + int(c)
                        cells.append((j, rr, cc))
                        if associated[j][rr, cc]:
                            blocked = True
                if cells and not blocked:
                    j, rr, cc = min(cells)
                    associated[j][rr, cc] = True
                    count += 1
        g[i] = count

    lb_assoc = sum(
        (Fraction(4 ** i * g[i], 8) for i in g), start=Fraction(0)
    )
    lb_series = Fraction(3, 32) * sum(4 ** i * t[i] for i in t)
    per_level = [
        {
            "level": lv.index,
            "a": lv.a,
            "windows": lv.window_count,
            "coveredCells": int(covered[lv.index].sum()),
            "maximalCells": int(maximal[lv.index].sum()),
            "goodWindows": t[lv.index],
            "associatedWindows": g[lv.index],
        }
        for lv in params.levels
    ]
    recursion = all(
        g[i] >= t[i] - t[i + 1] for i in range(params.lo, params.hi)
    )
    return WindowStats(
        q=q, per_level=per_level,
        lower_bound_assoc=lb_assoc, lower_bound_series=lb_series,
        holds_assoc=Fraction(q) >= lb_assoc,
        holds_top=g[params.hi] == t[params.hi],
        holds_recursion=recursion,
        holds_series=Fraction(q) >= lb_series,
    )


def _bridge_query_counts(params: HardParams, lv: HardLevel, qx, qy):
    """Sparse x_{w,b,k} counts: queries per bridge of each bridge square.

    Returns (keys, counts) with key = ((w * cells + R) * cells + C) * br + k.
    """
    n = params.n
    a = lv.a
    side = lv.window_side
    cells = lv.cells_per_window_row
    br = lv.bridges_per_square
    inside = (qx < n) & (qy < n)
    x = qx[inside]
    y = qy[inside]
    w = (y // side) * lv.windows_per_row + (x // side)
    lx = x % side
    ly = y % side
    R = ly // a
    C = lx // a
    yin = ly % a
    ok = ((R + C) % 2 == 1) & (C >= 1) & (yin % 2 == 1) & (yin <= a - 3)
    if br == 0 or not ok.any():
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    k = (yin[ok] - 1) // 2
    key = (((w[ok] * cells + R[ok]) * cells + C[ok]) * br + k)
    return np.unique(key, return_counts=True)


def _candidate_squares(params: HardParams, lv: HardLevel, qx, qy,
                       with_offsets: bool = False):
    """Bridge squares where every bridge holds at least one query, keyed by
    window index.  A square with an unqueried bridge can never have all its
    disconnecting pixels inside the query set, so it is dropped here.

    with_offsets additionally records the sorted queried offsets of each
    bridge, which the Monte Carlo estimator tests membership against.
    """
    n = params.n
    a = lv.a
    side = lv.window_side
    cells = lv.cells_per_window_row
    br = lv.bridges_per_square
    keys, counts = _bridge_query_counts(params, lv, qx, qy)
    squares = keys // br
    out: dict[int, list] = {}
    if len(keys) == 0 or br == 0:
        return out
    uniq_sq, start = np.unique(squares, return_index=True)
    boundaries = np.append(start, len(squares))
    inside = (qx < n) & (qy < n)
    x = qx[inside]
    y = qy[inside]
    for s_i, sq in enumerate(uniq_sq.tolist()):
        lo, hi = boundaries[s_i], boundaries[s_i + 1]
        if hi - lo < br:
            continue
        ks = keys[lo:hi] % br
        cnts = counts[lo:hi]
        entry = {"counts": np.zeros(br, dtype=np.int64)}
        entry["counts"][ks] = cnts
        window = sq // (cells * cells)
        if with_offsets:
            R = (sq // cells) % cells
            C = sq % cells
            wr, wc = divmod(window, lv.windows_per_row)
            x0 = wc * side + C * a
            y0 = wr * side + R * a
            offsets = []
            for k in range(br):
                row = y0 + 2 * k + 1
                sel = (y == row) & (x >= x0) & (x < x0 + a)
                offsets.append(np.sort(x[sel] - x0))
            entry["offsets"] = offsets
        out.setdefault(int(window), []).append(entry)
    return out


def revealing_probability_exact(params: HardParams, qx, qy) -> float:
    """Exact Pr[E]: the query set contains all disconnecting pixels of some
    bridge square of the randomly chosen interesting window."""
    qx, qy = canonical_queries(qx, qy, params.canvas_side)
    total = 0.0
    n_levels = params.hi - params.lo + 1
    for lv in params.levels:
        cands = _candidate_squares(params, lv, qx, qy)
        level_sum = 0.0
        for window, squares in cands.items():
            log_none = 0.0
            for sq in squares:
                p_sq = float(np.prod(sq["counts"] / lv.a))
                if p_sq > 0:
                    log_none += math.log1p(-p_sq) if p_sq < 1 else -math.inf
            level_sum += -math.expm1(log_none)
        total += level_sum / lv.window_count
    return total / n_levels


def revealing_probability_mc(params: HardParams, qx, qy, trials: int,
                             seed=0) -> tuple[float, float]:
    """Monte Carlo estimate of Pr[E] by drawing instance randomness only.

    Draws (level, window, disconnecting offsets) exactly as the instance
    distribution does, restricted to bridge squares that could possibly
    reveal (a square with an unqueried bridge never does); a square reveals
    when every drawn offset lands on a queried position of its bridge.
    """
    qx, qy = canonical_queries(qx, qy, params.canvas_side)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    per_level = {
        lv.index: _candidate_squares(params, lv, qx, qy, with_offsets=True)
        for lv in params.levels
    }
    hits = 0
    for _ in range(trials):
        level = int(rng.integers(params.lo, params.hi + 1))
        lv = params.level(level)
        window = int(rng.integers(0, lv.window_count))
        squares = per_level[level].get(window, ())
        revealed = False
        for sq in squares:
            draws = rng.integers(0, lv.a, size=lv.bridges_per_square)
            ok = True
            for k, off in enumerate(draws):
                pos = sq["offsets"][k]
                j = np.searchsorted(pos, off)
                if j >= len(pos) or pos[j] != off:
                    ok = False
                    break
            if ok:
                revealed = True
                break
        hits += revealed
    est = hits / trials
    stderr = math.sqrt(max(est * (1 - est), 1e-12) / trials)
    return est, stderr


# --- Query strategies -----------------------------------------------------

def strategy_uniform(params: HardParams, q: int, seed=0):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    side = params.canvas_side
    codes = rng.choice(side * side, size=min(q, side * side), replace=False)
    return codes % side, codes // side


def strategy_grid(params: HardParams, q: int):
    """About q queries on an even lattice over the canvas."""
    side = params.canvas_side
    stride = max(1, int(math.sqrt(side * side / max(q, 1))))
    ax = np.arange(0, side, stride)
    gx, gy = np.meshgrid(ax, ax)
    return gx.ravel()[:q], gy.ravel()[:q]


def strategy_bridges(params: HardParams, q: int | None = None,
                     squares_per_window: int = 1):
    """Query whole bridge rows of a few squares in every window.

    Takes the first squares_per_window bridge squares (row-major) of each
    window at each level and queries all their bridge rows in full; such a
    square reveals its window with certainty, so with enough budget for one
    square everywhere Pr[E] = 1.  q caps the total query count (None means
    no cap) and cuts off mid-schedule when exceeded.
    """
    xs: list = []
    ys: list = []
    budget = math.inf if q is None else q
    for lv in params.levels:
        rs, cs = bridge_cells(lv)
        per_square = lv.a * lv.bridges_per_square
        if per_square == 0:
            continue
        take = min(squares_per_window, len(rs))
        for window in range(lv.window_count):
            wr, wc = divmod(window, lv.windows_per_row)
            for b in range(take):
                if budget < per_square:
                    return (np.array(xs, dtype=np.int64),
                            np.array(ys, dtype=np.int64))
                x0 = wc * lv.window_side + int(cs[b]) * lv.a
                y0 = wr * lv.window_side + int(rs[b]) * lv.a
                for k in range(lv.bridges_per_square):
                    row = y0 + 2 * k + 1
                    xs.extend(range(x0, x0 + lv.a))
                    ys.extend([row] * lv.a)
                budget -= per_square
    return np.array(xs, dtype=np.int64), np.array(ys, dtype=np.int64)


def measure_cstar(params: HardParams, seeds=(0, 1, 2), target: float = 1 / 3,
                  steps: int = 12) -> dict:
    """Bisect for the largest c with mean exact Pr[E] below the target for
    the uniform strategy at q = c * (1/eps) * log2(1/eps)."""
    inv = float(1 / params.eps)
    logeps = int(math.log2(inv))
    scale = inv * logeps

    def mean_pr(c: float) -> float:
        qn = max(1, int(c * scale))
        vals = [
            revealing_probability_exact(
                params, *strategy_uniform(params, qn, seed=s)
            )
            for s in seeds
        ]
        return sum(vals) / len(vals)

    lo, hi = -20.0, 0.0
    if mean_pr(2.0 ** hi) < target:
        lo = hi
    else:
        while hi - lo > 1e-9 and steps:
            steps -= 1
            mid = (lo + hi) / 2
            if mean_pr(2.0 ** mid) < target:
                lo = mid
            else:
                hi = mid
    cstar = 2.0 ** lo
    return {
        "cStar": cstar,
        "qAtCStar": int(cstar * scale),
        "prAtCStar": mean_pr(cstar),
        "target": target,
    }
