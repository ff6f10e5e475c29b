"""Exact and analytic costs for repairing squares and whole images.

The local cost of a square is the number of pixel flips needed to make its
contents border-connected (every black component touches the square
boundary); the effective local cost caps it at twice the square side.  For
sides up to 4 the cost is computed exactly by a breadth-first search over
the hypercube of all contents.  For larger squares two certified upper
bounds are available: a residue-class repair that costs at most a quarter
of the area, and an exact count for sparse patterns of isolated dots.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .geometry import enumerate_squares, level_count, level_side
from .image import Image, connected_components

MAX_EXACT_SIDE = 4


class TooLarge(ValueError):
    """Exact distance requested for a side above the exhaustive limit."""


class PatternViolation(ValueError):
    """Contents do not form a valid isolated-dot pattern."""


class CostUnavailable(RuntimeError):
    """The cost provider cannot certify a local cost for some square."""


class OutputNotConnected(RuntimeError):
    """Internal check failed: a repair did not produce a connected image."""


def _as_bits(sub) -> np.ndarray:
    if isinstance(sub, Image):
        return sub.bits
    arr = np.asarray(sub, dtype=bool)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("square contents must be a square 2d array")
    return arr


def _pack(bits: np.ndarray) -> int:
    flat = bits.ravel()
    return int(sum(1 << int(i) for i in np.nonzero(flat)[0]))


@lru_cache(maxsize=None)
def _mask_tables(side: int):
    """Validity masks for all 2^(side^2) contents, by bit-parallel flooding.

    Bit b = r*side + c.  Returns (border_connected, connected) bool arrays.
    """
    cells = side * side
    n = 1 << cells
    full = np.uint64(n - 1)
    masks = np.arange(n, dtype=np.uint64)

    col = np.arange(cells) % side
    not_col0 = np.uint64(sum(1 << b for b in range(cells) if col[b] != 0))
    not_col_last = np.uint64(
        sum(1 << b for b in range(cells) if col[b] != side - 1)
    )
    border_bits = np.uint64(
        sum(
            1 << (r * side + c)
            for r in range(side)
            for c in range(side)
            if r in (0, side - 1) or c in (0, side - 1)
        )
    )
    shift1 = np.uint64(1)
    shifts = np.uint64(side)

    def flood(seed: np.ndarray) -> np.ndarray:
        cur = seed & masks
        while True:
            grow = (
                cur
                | ((cur << shift1) & not_col0)
                | ((cur >> shift1) & not_col_last)
                | ((cur << shifts) & full)
                | (cur >> shifts)
            ) & masks
            if np.array_equal(grow, cur):
                return cur
            cur = grow

    border_ok = flood(np.full(n, border_bits, dtype=np.uint64)) == masks
    lowest = masks & (~masks + np.uint64(1))
    connected_ok = flood(lowest) == masks
    return border_ok, connected_ok


@lru_cache(maxsize=None)
def _distance_table(side: int, target: str):
    """(dist, nearest) over all contents to the nearest valid contents."""
    border_ok, connected_ok = _mask_tables(side)
    valid = border_ok if target == "border" else connected_ok
    cells = side * side
    n = 1 << cells
    dist = np.full(n, 255, dtype=np.uint8)
    nearest = np.arange(n, dtype=np.uint32)
    dist[valid] = 0
    frontier = np.nonzero(valid)[0].astype(np.uint32)
    flips = (np.uint32(1) << np.arange(cells, dtype=np.uint32))
    level = 0
    while len(frontier):
        level += 1
        cand = (frontier[:, None] ^ flips[None, :]).ravel()
        src = np.repeat(frontier, cells)
        new_mask = dist[cand] == 255
        cand = cand[new_mask]
        src = src[new_mask]
        uniq, first = np.unique(cand, return_index=True)
        dist[uniq] = level
        nearest[uniq] = nearest[src[first]]
        frontier = uniq
    return dist, nearest


def _exact_dist(sub, target: str) -> int:
    bits = _as_bits(sub)
    side = bits.shape[0]
    if side > MAX_EXACT_SIDE:
        raise TooLarge(f"exhaustive distance limited to side {MAX_EXACT_SIDE}")
    dist, _ = _distance_table(side, target)
    return int(dist[_pack(bits)])


def exact_dist_border_connected(sub) -> int:
    """Exact flips to the nearest border-connected contents (side <= 4)."""
    return _exact_dist(sub, "border")


def exact_dist_connected(sub) -> int:
    """Exact flips to the nearest connected contents (side <= 4)."""
    return _exact_dist(sub, "connected")


def nearest_border_connected(sub) -> Image:
    """A border-connected contents at exact minimum flip distance."""
    bits = _as_bits(sub)
    side = bits.shape[0]
    if side > MAX_EXACT_SIDE:
        raise TooLarge(f"exhaustive repair limited to side {MAX_EXACT_SIDE}")
    _, nearest = _distance_table(side, "border")
    code = int(nearest[_pack(bits)])
    out = np.zeros(side * side, dtype=bool)
    for b in range(side * side):
        out[b] = bool((code >> b) & 1)
    return Image(out.reshape(side, side))


def mod3_border_fix(sub) -> tuple[Image, int]:
    """Cheap certified repair to border-connected contents.

    Sparse contents (black area at most a quarter) are whitened entirely;
    otherwise the cheapest of the three residue classes of rows y = r mod 3
    is fully blackened, which connects everything to the boundary through
    black rows at distance at most 1 from any pixel.  Cost never exceeds
    ceil(k^2 / 4).
    """
    bits = _as_bits(sub)
    k = bits.shape[0]
    blacks = int(bits.sum())
    if 4 * blacks <= k * k:
        return Image.blank(k), blacks
    costs = [int((~bits[r::3, :]).sum()) for r in range(min(3, k))]
    r = int(np.argmin(costs))
    out = bits.copy()
    out[r::3, :] = True
    fixed = Image(out)
    if not connected_components(fixed).touches_border.all():
        raise OutputNotConnected("residue repair left an enclosed component")
    return fixed, costs[r]


def connectify_via_grid(img, eps) -> tuple[Image, int]:
    """Connect an image by blackening the coarsest grid and repairing each
    grid square; the total cost certifies an upper bound on the distance to
    connectedness."""
    if isinstance(img, np.ndarray):
        img = Image(img)
    n = img.side
    if connected_components(img).count <= 1:
        return img, 0
    k = level_side(eps, 0)
    pitch = k + 1
    bits = img.bits.copy()
    coords = np.arange(n)
    grid_rows = coords % pitch == 0
    bits[grid_rows, :] = True
    bits[:, grid_rows] = True
    cost = int(bits.sum()) - int(img.bits.sum())
    for square in enumerate_squares(n, eps, 0):
        u, v = square.origin
        sub = bits[v + 1:v + 1 + k, u + 1:u + 1 + k]
        if k <= MAX_EXACT_SIDE:
            fixed = nearest_border_connected(sub)
        else:
            fixed, _ = mod3_border_fix(sub)
        cost += int((fixed.bits != sub).sum())
        bits[v + 1:v + 1 + k, u + 1:u + 1 + k] = fixed.bits
    out = Image(bits)
    if connected_components(out).count > 1:
        raise OutputNotConnected("grid repair left multiple components")
    return out, cost


def _dot_positions(bits: np.ndarray):
    ys, xs = np.nonzero(bits)
    return xs, ys


def _check_dot_pattern(xs, ys, side: int):
    """Isolated dots, pairwise Chebyshev distance >= 3, boundary clearance
    >= 2 (0-based coordinates in [2, side-3])."""
    problems = []
    if len(xs):
        if xs.min() < 2 or ys.min() < 2 or xs.max() > side - 3 or ys.max() > side - 3:
            problems.append("dot within 2 of the boundary")
        occupied = {}
        for x, y in zip(xs.tolist(), ys.tolist()):
            occupied[(x, y)] = True
        for x, y in zip(xs.tolist(), ys.tolist()):
            for dx in (-2, -1, 0, 1, 2):
                for dy in (-2, -1, 0, 1, 2):
                    if (dx or dy) and (x + dx, y + dy) in occupied:
                        problems.append("two dots within Chebyshev distance 2")
                        return problems
    return problems


def dot_local_cost(sub) -> int:
    """Exact local cost of an isolated-dot square: the number of dots.

    Each dot owns a disjoint 3x3 box fully inside the square, and any
    border-connected contents must change at least one pixel per box, so
    whitening every dot is optimal.
    """
    bits = _as_bits(sub)
    xs, ys = _dot_positions(bits)
    problems = _check_dot_pattern(xs, ys, bits.shape[0])
    if problems:
        raise PatternViolation("; ".join(problems))
    return len(xs)


class BruteForceCost:
    """Local costs by exhaustive distance; only tiny squares qualify."""

    provenance = "exhaustive"

    def __init__(self, image: Image):
        self.image = image if isinstance(image, Image) else Image(image)

    def local_cost(self, square) -> int:
        if square.k > MAX_EXACT_SIDE:
            raise CostUnavailable(
                f"square side {square.k} exceeds the exhaustive limit"
            )
        u, v = square.origin
        sub = self.image.bits[v + 1:v + 1 + square.k, u + 1:u + 1 + square.k]
        return exact_dist_border_connected(sub)


class AnalyticDotCost:
    """Local costs for images whose black pixels are a valid dot pattern.

    Validates once that the dots are isolated with pairwise Chebyshev
    distance >= 3, and per level that every dot keeps clearance >= 2 inside
    its square frame (so no dot sits on or near a grid line); the local cost
    of a square is then exactly its dot count.
    """

    provenance = "analytic"

    def __init__(self, xs, ys, n: int, eps):
        self.xs = np.asarray(xs, dtype=np.int64)
        self.ys = np.asarray(ys, dtype=np.int64)
        self.n = int(n)
        self.eps = eps
        problems = _check_dot_pattern(self.xs, self.ys, self.n)
        if problems:
            raise PatternViolation("; ".join(problems))
        self._level_counts: dict[int, np.ndarray] = {}

    @classmethod
    def from_image(cls, img, eps) -> "AnalyticDotCost":
        if isinstance(img, np.ndarray):
            img = Image(img)
        xs, ys = _dot_positions(img.bits)
        return cls(xs, ys, img.side, eps)

    def _counts(self, level: int) -> np.ndarray:
        cached = self._level_counts.get(level)
        if cached is not None:
            return cached
        k = level_side(self.eps, level)
        pitch = k + 1
        spr = (self.n - 1) // pitch
        lx = self.xs % pitch
        ly = self.ys % pitch
        if len(lx) and (lx.min() < 3 or ly.min() < 3
                        or lx.max() > pitch - 3 or ly.max() > pitch - 3):
            raise CostUnavailable(
                f"a dot is within 2 of a level-{level} square boundary"
            )
        sq = (self.xs // pitch) + (self.ys // pitch) * spr
        counts = np.bincount(sq, minlength=spr * spr)
        self._level_counts[level] = counts
        return counts

    def local_cost(self, square) -> int:
        counts = self._counts(square.level)
        pitch = square.k + 1
        spr = (self.n - 1) // pitch
        u, v = square.origin
        return int(counts[(u // pitch) + (v // pitch) * spr])

    def level_costs(self, level: int) -> np.ndarray:
        """Row-major local costs of every square of one level."""
        return self._counts(level)


@dataclass
class AuditReport:
    n: int
    eps: Fraction
    per_level: list
    total: int
    threshold: Fraction
    passes: bool
    near_threshold: bool
    provenance: str


def structural_audit(n: int, eps, provider,
                     near_margin: Fraction = Fraction(1, 50)) -> AuditReport:
    """Sum effective local costs over all squares of all levels and compare
    with the rejection threshold eps * n^2 / 2."""
    levels = level_count(eps)
    per_level = []
    total = 0
    for i in range(levels):
        k = level_side(eps, i)
        if hasattr(provider, "level_costs"):
            costs = np.asarray(provider.level_costs(i))
            level_sum = int(np.minimum(costs, 2 * k).sum())
            squares = len(costs)
        else:
            level_sum = 0
            squares = 0
            for square in enumerate_squares(n, eps, i):
                level_sum += min(2 * k, provider.local_cost(square))
                squares += 1
        per_level.append(
            {"level": i, "k": k, "squares": squares, "elcSum": level_sum}
        )
        total += level_sum
    threshold = Fraction(eps) * n * n / 2
    passes = Fraction(total) >= threshold
    near = abs(Fraction(total) - threshold) <= Fraction(near_margin) * threshold
    return AuditReport(
        n=n, eps=Fraction(eps), per_level=per_level, total=total,
        threshold=threshold, passes=passes, near_threshold=bool(near),
        provenance=getattr(provider, "provenance", "unknown"),
    )
