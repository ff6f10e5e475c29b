"""Deterministic grid geometry for the multi-level square partition.

For a dyadic proximity parameter eps, level i in [0, log2(1/eps)) has square
side k_i = (4/eps) * 2^-i - 1 and pitch k_i + 1.  Grid pixels of level i are
those whose x or y is divisible by the pitch; the pitch-aligned k_i x k_i
tiles between grid lines are the squares of that level.

Inside one square, the diagonal lattice with odd pitch m (pixels where
m | (x+y) or m | (x-y) in square-local coordinates [1..k]^2) carves the rest
of the square into diamond-shaped connected regions.  The adaptive subroutine
queries the lattice and reasons about the diamonds, so this module provides
both a fully materialized decomposition (small k, used by tests) and a
compact memoized index with closed-form diamond lookup (used in the tester
hot path).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np


class InvalidEps(ValueError):
    """eps is not a dyadic value of the form 2^-L with L >= 1."""


class LevelOutOfRange(ValueError):
    """Requested level is not in [0, log2(1/eps))."""


class NotNormalized(ValueError):
    """Image side is not of the form 2^j + 1 aligned to the level pitch."""


class DegenerateLattice(ValueError):
    """Lattice pitch m < 3: the diagonal lattice would cover the square."""


def as_eps(eps) -> Fraction:
    """Validate and convert eps to an exact Fraction 2^-L, L >= 1."""
    value = Fraction(eps)
    if not (0 < value < 1):
        raise InvalidEps(f"eps must be in (0, 1), got {value}")
    inv = 1 / value
    if inv.denominator != 1 or inv.numerator & (inv.numerator - 1):
        raise InvalidEps(f"1/eps must be a power of 2, got {value}")
    return value


def level_count(eps) -> int:
    """Number of levels, log2(1/eps)."""
    value = as_eps(eps)
    return (1 / value).numerator.bit_length() - 1


def level_side(eps, i: int) -> int:
    """Square side k_i = (4/eps) * 2^-i - 1."""
    levels = level_count(eps)
    if not 0 <= i < levels:
        raise LevelOutOfRange(f"level {i} not in [0, {levels})")
    return (1 << (levels + 2 - i)) - 1


def level_pitch(eps, i: int) -> int:
    return level_side(eps, i) + 1


def is_grid_pixel(eps, i: int, x: int, y: int) -> bool:
    """True when (x, y) lies on a grid line of level i."""
    pitch = level_pitch(eps, i)
    return x % pitch == 0 or y % pitch == 0


@dataclass(frozen=True)
class LevelGeometry:
    """Constants of one level for a normalized image side n."""

    eps: Fraction
    level: int
    k: int
    pitch: int
    squares_per_row: int


@dataclass(frozen=True)
class SquareRef:
    """One k x k square: pixels {1..k}^2 + origin, origin on a grid crossing."""

    geometry: LevelGeometry
    origin: tuple[int, int]

    @property
    def k(self) -> int:
        return self.geometry.k

    @property
    def level(self) -> int:
        return self.geometry.level

    def contains(self, x: int, y: int) -> bool:
        u, v = self.origin
        return u + 1 <= x <= u + self.k and v + 1 <= y <= v + self.k

    def local(self, x: int, y: int) -> tuple[int, int]:
        u, v = self.origin
        return x - u, y - v

    def to_global(self, lx, ly):
        u, v = self.origin
        return lx + u, ly + v


def _check_normalized(n: int, pitch: int) -> int:
    side = n - 1
    if side < 1 or side & (side - 1) or side % pitch:
        raise NotNormalized(
            f"side {n} is not of the form 2^j + 1 with pitch {pitch} dividing {n - 1}"
        )
    return side // pitch


def level_geometry(n: int, eps, i: int) -> LevelGeometry:
    k = level_side(eps, i)
    pitch = k + 1
    spr = _check_normalized(n, pitch)
    return LevelGeometry(eps=as_eps(eps), level=i, k=k, pitch=pitch,
                         squares_per_row=spr)


def enumerate_squares(n: int, eps, i: int) -> list[SquareRef]:
    """All squares of level i in a normalized n x n image, row-major."""
    geo = level_geometry(n, eps, i)
    return [
        SquareRef(geometry=geo, origin=(col * geo.pitch, row * geo.pitch))
        for row in range(geo.squares_per_row)
        for col in range(geo.squares_per_row)
    ]


def sample_square(n: int, eps, i: int, rng) -> SquareRef:
    """Uniformly random square of level i (one generator draw)."""
    geo = level_geometry(n, eps, i)
    idx = int(rng.integers(0, geo.squares_per_row ** 2))
    row, col = divmod(idx, geo.squares_per_row)
    return SquareRef(geometry=geo, origin=(col * geo.pitch, row * geo.pitch))


def lattice_pitch(k: int) -> int:
    """Largest odd integer <= ceil(sqrt(k / log2(k)))."""
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    v = k / math.log2(k)
    c = math.ceil(math.sqrt(v))
    # Re-anchor the ceiling against float rounding at exact squares.
    if (c - 1) ** 2 >= v:
        c -= 1
    elif c ** 2 < v:
        c += 1
    return c if c % 2 else c - 1


# --- Fully materialized decomposition (small k; used by tests and checks) ---

@dataclass(frozen=True)
class DiamondDecomposition:
    """Explicit diamond/fence structure of one square in local coordinates.

    lattice: set of lattice pixels; diamonds: list of pixel sets (the
    connected regions between lattice lines); fences[d]: lattice pixels
    4-adjacent to diamond d; adjacency: {(d1, d2): shared fence pixels} for
    d1 < d2 with a nonempty common fence portion; ring_diamonds: indices of
    diamonds containing a square-boundary pixel (local x or y in {1, k}).
    """

    k: int
    m: int
    lattice: frozenset
    diamonds: list
    fences: list
    adjacency: dict
    ring_diamonds: frozenset


def diamond_decomposition(square_or_k) -> DiamondDecomposition:
    """Materialize the diamond decomposition for a square of side k."""
    k = square_or_k.k if isinstance(square_or_k, SquareRef) else int(square_or_k)
    m = lattice_pitch(k)
    if m < 3:
        raise DegenerateLattice(f"lattice pitch {m} for k={k}; no diamonds")
    idx = _DiamondIndex.get(k)

    lattice = frozenset(zip(idx.lat_x.tolist(), idx.lat_y.tolist()))
    diamonds = [set() for _ in range(idx.n_diamonds)]
    xs, ys = np.meshgrid(np.arange(1, k + 1), np.arange(1, k + 1))
    xs = xs.ravel()
    ys = ys.ravel()
    codes, is_lat = idx.codes_of(xs, ys)
    ids = idx.ids_from_codes(codes)
    for x, y, lat, d in zip(xs.tolist(), ys.tolist(), is_lat.tolist(), ids.tolist()):
        if not lat:
            diamonds[d].add((x, y))

    fences = [set() for _ in range(idx.n_diamonds)]
    for x, y in lattice:
        for d in idx.adjacent_diamonds(x, y):
            fences[d].add((x, y))

    adjacency: dict = {}
    for x, y in lattice:
        ds = idx.adjacent_diamonds(x, y)
        for a in range(len(ds)):
            for b in range(a + 1, len(ds)):
                d1, d2 = sorted((ds[a], ds[b]))
                adjacency.setdefault((d1, d2), set()).add((x, y))

    ring = frozenset(int(d) for d in np.nonzero(idx.ring)[0])
    return DiamondDecomposition(
        k=k, m=m, lattice=lattice, diamonds=[frozenset(d) for d in diamonds],
        fences=[frozenset(f) for f in fences], adjacency=adjacency,
        ring_diamonds=ring,
    )


# --- Compact memoized index (closed-form diamond ids; tester hot path) -----

_ROW_CHUNK = 512


class _DiamondIndex:
    """Closed-form diamond lookup for a square of side k.

    A non-lattice pixel (x, y) belongs to the diamond identified by the pair
    (floor((x+y)/m), floor((x-y)/m)); the pairs are encoded into one integer
    code and mapped to dense ids through a sorted code table.
    """

    def __init__(self, k: int):
        m = lattice_pitch(k)
        if m < 3:
            raise DegenerateLattice(f"lattice pitch {m} for k={k}; no diamonds")
        self.k = k
        self.m = m
        # d = x - y ranges over [1-k, k-1]; shift to keep codes nonnegative.
        self._d_shift = (k - 1) // m + 1
        self._base = 2 * self._d_shift + 2

        lat_x_parts = []
        lat_y_parts = []
        code_parts = []
        for y0 in range(1, k + 1, _ROW_CHUNK):
            ys = np.arange(y0, min(y0 + _ROW_CHUNK, k + 1), dtype=np.int64)
            xs = np.arange(1, k + 1, dtype=np.int64)
            gx, gy = np.meshgrid(xs, ys)
            gx = gx.ravel()
            gy = gy.ravel()
            codes, is_lat = self.codes_of(gx, gy)
            lat_x_parts.append(gx[is_lat].astype(np.int32))
            lat_y_parts.append(gy[is_lat].astype(np.int32))
            code_parts.append(np.unique(codes[~is_lat]))
        self.lat_x = np.concatenate(lat_x_parts)
        self.lat_y = np.concatenate(lat_y_parts)
        self.codes = np.unique(np.concatenate(code_parts))
        self.n_diamonds = len(self.codes)

        ring_x = np.concatenate([
            np.arange(1, k + 1), np.arange(1, k + 1),
            np.full(k, 1), np.full(k, k),
        ]).astype(np.int64)
        ring_y = np.concatenate([
            np.full(k, 1), np.full(k, k),
            np.arange(1, k + 1), np.arange(1, k + 1),
        ]).astype(np.int64)
        codes, is_lat = self.codes_of(ring_x, ring_y)
        self.ring = np.zeros(self.n_diamonds, dtype=bool)
        self.ring[self.ids_from_codes(codes[~is_lat])] = True

    _cache: dict = {}

    @classmethod
    def get(cls, k: int) -> "_DiamondIndex":
        idx = cls._cache.get(k)
        if idx is None:
            idx = cls._cache[k] = cls(k)
        return idx

    def codes_of(self, xs, ys):
        """Encoded diamond keys and lattice flags for local coordinates."""
        s = xs + ys
        d = xs - ys
        is_lat = (s % self.m == 0) | (d % self.m == 0)
        codes = (s // self.m) * self._base + (d // self.m + self._d_shift)
        return codes, is_lat

    def ids_from_codes(self, codes):
        return np.searchsorted(self.codes, codes)

    def diamond_id(self, x: int, y: int) -> int:
        """Dense diamond id of a non-lattice local pixel, or -1 for lattice."""
        s = x + y
        d = x - y
        if s % self.m == 0 or d % self.m == 0:
            return -1
        code = (s // self.m) * self._base + (d // self.m + self._d_shift)
        return int(np.searchsorted(self.codes, code))

    def adjacent_diamonds(self, x: int, y: int) -> list:
        """Dense ids of diamonds 4-adjacent to a local pixel (for lattice use)."""
        out = []
        for dx, dy in ((0, -1), (0, 1), (-1, 0), (1, 0)):
            nx, ny = x + dx, y + dy
            if 1 <= nx <= self.k and 1 <= ny <= self.k:
                d = self.diamond_id(nx, ny)
                if d >= 0 and d not in out:
                    out.append(d)
        return out

    def neighbor_diamonds_bulk(self, xs, ys):
        """(len(xs), 4) array of adjacent diamond ids, -1 where none."""
        n = len(xs)
        out = np.full((n, 4), -1, dtype=np.int64)
        for col, (dx, dy) in enumerate(((0, -1), (0, 1), (-1, 0), (1, 0))):
            nx = xs + dx
            ny = ys + dy
            ok = (nx >= 1) & (nx <= self.k) & (ny >= 1) & (ny <= self.k)
            if not ok.any():
                continue
            codes, is_lat = self.codes_of(nx[ok], ny[ok])
            good = ~is_lat
            ids = np.full(int(ok.sum()), -1, dtype=np.int64)
            ids[good] = self.ids_from_codes(codes[good])
            out[ok, col] = ids
        return out


def diamond_index(k: int) -> _DiamondIndex:
    """Memoized compact diamond index for side k (m >= 3 required)."""
    return _DiamondIndex.get(k)


@lru_cache(maxsize=None)
def lattice_count(k: int) -> int:
    """|L| for side k, by residue counting (no grid materialization)."""
    m = lattice_pitch(k)
    if m == 1:
        return k * k
    # per_residue[r] = #{v in [1, k] : v % m == r}; for x % m == 0 the two
    # congruences y == -x and y == x (mod m) coincide, otherwise they are
    # disjoint because m is odd.
    per_residue = [len(range(r if r else m, k + 1, m)) for r in range(m)]
    total = 0
    for xr in range(m):
        if xr == 0:
            total += per_residue[0] * per_residue[0]
        else:
            total += per_residue[xr] * (per_residue[(m - xr) % m] + per_residue[xr])
    return total
